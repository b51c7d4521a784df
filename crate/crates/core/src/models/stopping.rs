//! Finite-state optimal stopping. In state `x` the agent either stops
//! (action 1, terminal reward `r(x)`) or continues (action 0, flow `c(x)`
//! plus the discounted expected value of the next state):
//! `H(x, a, v) = a r(x) + (1 - a) [ c(x) + beta sum_x' v(x') P(x, x') ]`.
//!
//! When the state splits as `x = (y, z)` with `(y', z')` independent of `y`
//! given `z`, the transition row depends on `z` alone and the refactored
//! value function lives on the `z` grid only, dropping the `y` coordinates
//! entirely. That split is the source of the dimensionality reduction
//! measured by the scaling benchmarks.

use std::sync::Arc;

use crate::dp::{DynamicProgram, PlanFactorization};
use crate::error::{DpError, Result};
use crate::models::finite_mdp::weighted_dot;
use crate::numerics::{linspace, tauchen};
use crate::space::StateActionSpace;
use crate::tables::{HFn, Policy};

const ROW_SUM_TOL: f64 = 1e-10;

/// States are flattened as `x = iy * z_size + iz` (the `z` coordinate
/// fastest); `y_size = 1` expresses a model without a `y` component.
#[derive(Debug)]
pub struct StoppingModel {
    y_size: usize,
    z_size: usize,
    terminal: Vec<f64>,
    flow: Vec<f64>,
    /// `z_size` rows when split, `y_size * z_size` rows otherwise; each row
    /// has one probability per state.
    trans: Vec<f64>,
    split: bool,
    beta: f64,
    space: StateActionSpace,
}

impl StoppingModel {
    /// Builds a model whose transition rows are indexed by `z` alone (the
    /// conditional-independence split).
    pub fn new_split(
        y_size: usize,
        z_size: usize,
        terminal: Vec<f64>,
        flow: Vec<f64>,
        z_rows: Vec<Vec<f64>>,
        beta: f64,
    ) -> Result<Self> {
        Self::build(y_size, z_size, terminal, flow, z_rows, true, beta)
    }

    /// Builds a model from one transition row per state. When `declare_split`
    /// is set, the rows are checked to be identical across states sharing a
    /// `z` coordinate, and the model stores only the `z`-indexed rows.
    pub fn new_full(
        y_size: usize,
        z_size: usize,
        terminal: Vec<f64>,
        flow: Vec<f64>,
        rows: Vec<Vec<f64>>,
        declare_split: bool,
        beta: f64,
    ) -> Result<Self> {
        let n = y_size * z_size;
        if rows.len() != n {
            return Err(DpError::Dimension(format!(
                "{} transition rows for {n} states",
                rows.len()
            )));
        }
        if declare_split {
            let mut z_rows = Vec::with_capacity(z_size);
            for iz in 0..z_size {
                let base = &rows[iz];
                for iy in 1..y_size {
                    let other = &rows[iy * z_size + iz];
                    if base
                        .iter()
                        .zip(other)
                        .any(|(a, b)| (a - b).abs() > ROW_SUM_TOL)
                    {
                        return Err(DpError::Parameter(format!(
                            "split declared but transition rows differ across y at z index {iz}"
                        )));
                    }
                }
                z_rows.push(base.clone());
            }
            Self::build(y_size, z_size, terminal, flow, z_rows, true, beta)
        } else {
            Self::build(y_size, z_size, terminal, flow, rows, false, beta)
        }
    }

    fn build(
        y_size: usize,
        z_size: usize,
        terminal: Vec<f64>,
        flow: Vec<f64>,
        rows: Vec<Vec<f64>>,
        split: bool,
        beta: f64,
    ) -> Result<Self> {
        let n = y_size * z_size;
        let expected_rows = if split { z_size } else { n };
        if terminal.len() != n || flow.len() != n {
            return Err(DpError::Dimension(format!(
                "terminal/flow tables must have {n} entries"
            )));
        }
        if rows.len() != expected_rows {
            return Err(DpError::Dimension(format!(
                "{} transition rows, expected {expected_rows}",
                rows.len()
            )));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(DpError::Parameter(format!(
                "discount factor {beta} outside [0, 1)"
            )));
        }
        let mut trans = Vec::with_capacity(expected_rows * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(DpError::Dimension(format!(
                    "transition row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&p| p < 0.0) {
                return Err(DpError::Parameter(format!(
                    "transition row {i} is not a probability vector (sum {sum})"
                )));
            }
            trans.extend_from_slice(row);
        }
        Ok(Self {
            y_size,
            z_size,
            terminal,
            flow,
            trans,
            split,
            beta,
            space: StateActionSpace::dense(n, 2),
        })
    }

    pub fn n_states(&self) -> usize {
        self.y_size * self.z_size
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    pub fn is_split(&self) -> bool {
        self.split
    }

    pub fn terminal_reward(&self, x: usize) -> f64 {
        self.terminal[x]
    }

    fn row(&self, x: usize) -> &[f64] {
        let n = self.n_states();
        let i = if self.split { x % self.z_size } else { x };
        &self.trans[i * n..(i + 1) * n]
    }

    fn z_row(&self, iz: usize) -> &[f64] {
        debug_assert!(self.split);
        let n = self.n_states();
        &self.trans[iz * n..(iz + 1) * n]
    }
}

impl DynamicProgram for StoppingModel {
    fn space(&self) -> &StateActionSpace {
        &self.space
    }

    fn aggregator(&self, x: usize, a: usize, v: &[f64]) -> f64 {
        if a == 1 {
            self.terminal[x]
        } else {
            self.flow[x] + self.beta * weighted_dot(self.row(x), v)
        }
    }

    fn discount(&self) -> f64 {
        self.beta
    }

    fn reward_lower_bound(&self) -> Option<f64> {
        self.terminal
            .iter()
            .chain(&self.flow)
            .copied()
            .reduce(f64::min)
    }

    fn sigma_affine(&self, sigma: &Policy) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.n_states();
        let mut r = Vec::with_capacity(n);
        let mut p = Vec::with_capacity(n);
        for x in 0..n {
            if sigma.action(x) == 1 {
                r.push(self.terminal[x]);
                p.push(vec![0.0; n]);
            } else {
                r.push(self.flow[x]);
                p.push(self.row(x).to_vec());
            }
        }
        Some((r, p))
    }
}

/// Continuation-value factorization: `W0 v` is the conditional expectation of
/// `v` (indexed by `z` when the split is declared, by the full state
/// otherwise) and `W1 g (x, a) = a r(x) + (1 - a) [c(x) + beta g(.)]`.
pub struct StoppingFactorization {
    model: Arc<StoppingModel>,
}

impl PlanFactorization for StoppingFactorization {
    fn reduced_len(&self) -> usize {
        if self.model.split {
            self.model.z_size
        } else {
            self.model.n_states()
        }
    }

    fn is_monotone(&self) -> bool {
        true
    }

    fn w0(&self, v: &[f64], out: &mut [f64]) {
        if self.model.split {
            for (iz, o) in out.iter_mut().enumerate() {
                *o = weighted_dot(self.model.z_row(iz), v);
            }
        } else {
            for (x, o) in out.iter_mut().enumerate() {
                *o = weighted_dot(self.model.row(x), v);
            }
        }
    }

    fn w1(&self, g: &[f64], out: &mut HFn) {
        let m = &self.model;
        for x in 0..m.n_states() {
            let red = if m.split { x % m.z_size } else { x };
            let pair = 2 * x;
            out.values[pair] = m.flow[x] + m.beta * g[red];
            out.values[pair + 1] = m.terminal[x];
        }
    }
}

/// Wraps a stopping model with its continuation-value factorization.
pub fn build_stopping(model: Arc<StoppingModel>) -> (Arc<StoppingModel>, StoppingFactorization) {
    let pf = StoppingFactorization {
        model: model.clone(),
    };
    (model, pf)
}

/// Normal cell probabilities of a grid given a mean and standard deviation,
/// normalized to sum to one.
fn normal_cells(grid: &[f64], mean: f64, sd: f64) -> Vec<f64> {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n01 = Normal::new(0.0, 1.0).expect("unit normal");
    let n = grid.len();
    let mut cells = Vec::with_capacity(n);
    for j in 0..n {
        let lo = if j == 0 {
            0.0
        } else {
            n01.cdf((0.5 * (grid[j - 1] + grid[j]) - mean) / sd)
        };
        let hi = if j == n - 1 {
            1.0
        } else {
            n01.cdf((0.5 * (grid[j] + grid[j + 1]) - mean) / sd)
        };
        cells.push(hi - lo);
    }
    let total: f64 = cells.iter().sum();
    cells.iter_mut().for_each(|c| *c /= total);
    cells
}

/// A smooth synthetic stopping family with a one-dimensional `y` coordinate,
/// used by the scaling benchmarks: `z` follows a Tauchen chain and `y'` is
/// drawn from a normal cell distribution whose mean shifts with `z'`.
/// Stopping pays `y`, continuing pays a constant flow.
pub fn synthetic_stopping(l: usize, k: usize, beta: f64) -> Result<StoppingModel> {
    let (z_grid, z_trans) = tauchen(0.8, 0.25, k, 3.0)?;
    let y_grid = linspace(0.0, 3.0, l);
    let n = l * k;
    let mut terminal = Vec::with_capacity(n);
    let mut flow = Vec::with_capacity(n);
    for &y in &y_grid {
        for _ in 0..k {
            terminal.push(y);
            flow.push(0.55);
        }
    }
    // P(z, (y', z')) = Pz(z, z') q(y' | z')
    let y_cells: Vec<Vec<f64>> = z_grid
        .points()
        .iter()
        .map(|&z| normal_cells(&y_grid, 1.5 + 0.6 * z, 0.5))
        .collect();
    let mut z_rows = Vec::with_capacity(k);
    for iz in 0..k {
        let mut row = vec![0.0; n];
        for (izn, &pz) in z_trans[iz].iter().enumerate() {
            for (iyn, &qy) in y_cells[izn].iter().enumerate() {
                row[iyn * k + izn] = pz * qy;
            }
        }
        z_rows.push(row);
    }
    StoppingModel::new_split(l, k, terminal, flow, z_rows, beta)
}

/// Job-search instance: the state is `(w, eta, s)` with wage offer `w`,
/// unemployment compensation `eta` and a persistent driver `s`; `(w', eta')`
/// are drawn conditionally on `s'`, so `y = (w, eta)`, `z = s` satisfies the
/// split and the reduced domain is the `s` grid alone. Accepting pays the
/// wage forever (`w / (1 - beta)`), rejecting pays `eta` and continues.
pub fn job_search(n_w: usize, n_eta: usize, n_s: usize, beta: f64) -> Result<StoppingModel> {
    let (s_grid, s_trans) = tauchen(0.7, 0.2, n_s, 3.0)?;
    let w_grid = linspace(0.2, 2.0, n_w);
    let eta_grid = linspace(0.05, 0.6, n_eta);
    let l = n_w * n_eta;
    let n = l * n_s;
    let mut terminal = Vec::with_capacity(n);
    let mut flow = Vec::with_capacity(n);
    for &w in &w_grid {
        for &eta in &eta_grid {
            for _ in 0..n_s {
                terminal.push(w / (1.0 - beta));
                flow.push(eta);
            }
        }
    }
    let w_cells: Vec<Vec<f64>> = s_grid
        .points()
        .iter()
        .map(|&s| normal_cells(&w_grid, 1.1 + 0.8 * s, 0.35))
        .collect();
    let eta_cells: Vec<Vec<f64>> = s_grid
        .points()
        .iter()
        .map(|&s| normal_cells(&eta_grid, 0.3 + 0.1 * s, 0.12))
        .collect();
    let mut z_rows = Vec::with_capacity(n_s);
    for is in 0..n_s {
        let mut row = vec![0.0; n];
        for (isn, &ps) in s_trans[is].iter().enumerate() {
            for (iwn, &qw) in w_cells[isn].iter().enumerate() {
                for (ien, &qe) in eta_cells[isn].iter().enumerate() {
                    row[(iwn * n_eta + ien) * n_s + isn] = ps * qw * qe;
                }
            }
        }
        z_rows.push(row);
    }
    StoppingModel::new_split(l, n_s, terminal, flow, z_rows, beta)
}
