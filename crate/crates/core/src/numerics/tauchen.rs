//! Tauchen discretization of the AR(1) process `y' = rho y + eps`,
//! `eps ~ N(0, delta^2)`, into a finite Markov chain.

use statrs::distribution::{ContinuousCDF, Normal};

use super::{Grid1D, GridKind};
use crate::error::{DpError, Result};

/// Discretizes the AR(1) process onto `n` grid points spanning `m`
/// unconditional standard deviations on each side of the mean. Row `i` of the
/// returned matrix holds the normal cell probabilities of moving from grid
/// point `i`; boundary cells absorb the tails, so every row sums to one.
///
/// `rho = 0` yields an i.i.d. chain with identical rows, which is how purely
/// transitory shocks are discretized.
pub fn tauchen(rho: f64, delta: f64, n: usize, m: f64) -> Result<(Grid1D, Vec<Vec<f64>>)> {
    if !(rho.abs() < 1.0) {
        return Err(DpError::Parameter(format!(
            "tauchen requires |rho| < 1, got {rho}"
        )));
    }
    if !(delta > 0.0) {
        return Err(DpError::Parameter(format!(
            "tauchen requires a positive innovation std, got {delta}"
        )));
    }
    if n < 2 {
        return Err(DpError::Parameter(format!(
            "tauchen requires at least 2 grid points, got {n}"
        )));
    }
    if !(m > 0.0) {
        return Err(DpError::Parameter(format!(
            "tauchen requires a positive coverage width, got {m}"
        )));
    }
    let sigma_y = delta / (1.0 - rho * rho).sqrt();
    let y_max = m * sigma_y;
    let points = super::linspace(-y_max, y_max, n);
    let half_step = (points[1] - points[0]) / 2.0;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mean = rho * points[i];
        let mut row = Vec::with_capacity(n);
        for (j, &yj) in points.iter().enumerate() {
            let p = if j == 0 {
                std_normal.cdf((yj - mean + half_step) / delta)
            } else if j == n - 1 {
                1.0 - std_normal.cdf((yj - mean - half_step) / delta)
            } else {
                std_normal.cdf((yj - mean + half_step) / delta)
                    - std_normal.cdf((yj - mean - half_step) / delta)
            };
            row.push(p);
        }
        rows.push(row);
    }
    Ok((Grid1D::new(points, GridKind::Tauchen)?, rows))
}
