//! Discretization and continuous-state machinery: equidistant grids, the
//! Tauchen AR(1) discretization, piecewise-linear interpolation with binary
//! search, and Monte Carlo fitted operators for continuous-state stopping
//! problems.

pub mod interp;
pub mod mc;
pub mod tauchen;

pub use interp::{bilinear_eval, interp_eval};
pub use mc::{mc_refactored_operator, mc_standard_operator, McStoppingModel, ShockDraws};
pub use tauchen::tauchen;

use crate::error::{DpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Equidistant,
    Tauchen,
}

/// A sorted one-dimensional grid.
#[derive(Debug, Clone)]
pub struct Grid1D {
    points: Vec<f64>,
    kind: GridKind,
}

impl Grid1D {
    pub fn new(points: Vec<f64>, kind: GridKind) -> Result<Self> {
        if points.len() < 2 {
            return Err(DpError::Parameter(format!(
                "grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DpError::Parameter(
                "grid points must be strictly increasing".into(),
            ));
        }
        Ok(Self { points, kind })
    }

    /// Equidistant grid of `n` points on `[lo, hi]`.
    pub fn equidistant(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(DpError::Parameter(format!(
                "equidistant grid needs hi > lo, got [{lo}, {hi}]"
            )));
        }
        Self::new(linspace(lo, hi, n), GridKind::Equidistant)
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn at(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// Index of the grid point nearest to `x` (ties to the lower index).
    pub fn nearest_index(&self, x: f64) -> usize {
        let pts = &self.points;
        let hi = pts.partition_point(|&p| p < x);
        if hi == 0 {
            return 0;
        }
        if hi == pts.len() {
            return pts.len() - 1;
        }
        if (x - pts[hi - 1]) <= (pts[hi] - x) {
            hi - 1
        } else {
            hi
        }
    }
}

/// `n` evenly spaced points on `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * step).collect()
}
