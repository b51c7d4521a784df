//! Piecewise-linear interpolation with binary-search bracket location.
//! Queries outside the grid clamp to the boundary value, so fitted value
//! iteration stays bounded.

use super::Grid1D;
use crate::error::{DpError, Result};

/// Locates the bracket `[i, i+1]` containing `x` and returns the blend
/// weight on the right endpoint; out-of-grid queries clamp.
#[inline]
pub(crate) fn bracket(points: &[f64], x: f64) -> (usize, f64) {
    let n = points.len();
    if x <= points[0] {
        return (0, 0.0);
    }
    if x >= points[n - 1] {
        return (n - 2, 1.0);
    }
    // first index with points[idx] > x, so the bracket is [idx-1, idx]
    let idx = points.partition_point(|&p| p <= x);
    let lo = idx - 1;
    let w = (x - points[lo]) / (points[lo + 1] - points[lo]);
    (lo, w)
}

/// Evaluates the piecewise-linear interpolant of `values` on `grid` at `x`.
/// Cost is O(log n) per query; NaN queries are a numerical-domain error.
pub fn interp_eval(grid: &Grid1D, values: &[f64], x: f64) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(DpError::Dimension(format!(
            "{} values on a grid of {} points",
            values.len(),
            grid.len()
        )));
    }
    if x.is_nan() {
        return Err(DpError::Parameter("interpolation query is NaN".into()));
    }
    Ok(interp_unchecked(grid.points(), values, x))
}

#[inline]
pub(crate) fn interp_unchecked(points: &[f64], values: &[f64], x: f64) -> f64 {
    // clamps return the stored boundary value exactly, not a blend
    if x <= points[0] {
        return values[0];
    }
    if x >= points[points.len() - 1] {
        return values[values.len() - 1];
    }
    let (lo, w) = bracket(points, x);
    values[lo] + w * (values[lo + 1] - values[lo])
}

/// Bilinear interpolation of `values` tabulated on the product grid
/// `y_grid x z_grid` (row-major, `z` fastest) at the point `(y, z)`.
pub fn bilinear_eval(
    y_grid: &Grid1D,
    z_grid: &Grid1D,
    values: &[f64],
    y: f64,
    z: f64,
) -> Result<f64> {
    if values.len() != y_grid.len() * z_grid.len() {
        return Err(DpError::Dimension(format!(
            "{} values on a {} x {} grid",
            values.len(),
            y_grid.len(),
            z_grid.len()
        )));
    }
    if y.is_nan() || z.is_nan() {
        return Err(DpError::Parameter("interpolation query is NaN".into()));
    }
    Ok(bilinear_unchecked(
        y_grid.points(),
        z_grid.points(),
        values,
        y,
        z,
    ))
}

#[inline]
pub(crate) fn bilinear_unchecked(
    y_pts: &[f64],
    z_pts: &[f64],
    values: &[f64],
    y: f64,
    z: f64,
) -> f64 {
    let k = z_pts.len();
    let (iy, wy) = bracket(y_pts, y);
    let (iz, wz) = bracket(z_pts, z);
    let v00 = values[iy * k + iz];
    let v01 = values[iy * k + iz + 1];
    let v10 = values[(iy + 1) * k + iz];
    let v11 = values[(iy + 1) * k + iz + 1];
    let lo = v00 + wz * (v01 - v00);
    let hi = v10 + wz * (v11 - v10);
    lo + wy * (hi - lo)
}
