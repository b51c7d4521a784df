use crate::error::{DpError, Result};

/// Enumerated state and action spaces together with the feasible
/// correspondence, stored in compressed form: `actions[offsets[x]..offsets[x+1]]`
/// lists the feasible actions of state `x` in increasing order of enumeration.
///
/// The set of feasible state-action pairs is flattened in the same order, so a
/// "pair index" (the position of `(x, a)` in the flattened list) indexes
/// tables that live on the pair set.
#[derive(Debug, Clone)]
pub struct StateActionSpace {
    n_states: usize,
    n_actions: usize,
    offsets: Vec<usize>,
    actions: Vec<usize>,
}

impl StateActionSpace {
    /// Builds the space from per-state feasible action lists.
    ///
    /// Fails if any state has an empty feasible set or an out-of-range action.
    pub fn new(n_states: usize, n_actions: usize, feasible: Vec<Vec<usize>>) -> Result<Self> {
        if feasible.len() != n_states {
            return Err(DpError::Dimension(format!(
                "feasible lists for {} states, expected {}",
                feasible.len(),
                n_states
            )));
        }
        let mut offsets = Vec::with_capacity(n_states + 1);
        let mut actions = Vec::new();
        offsets.push(0);
        for (x, list) in feasible.iter().enumerate() {
            if list.is_empty() {
                return Err(DpError::EmptyFeasibleSet { state: x });
            }
            for &a in list {
                if a >= n_actions {
                    return Err(DpError::Dimension(format!(
                        "state {x} lists action {a}, but there are only {n_actions} actions"
                    )));
                }
                actions.push(a);
            }
            offsets.push(actions.len());
        }
        Ok(Self {
            n_states,
            n_actions,
            offsets,
            actions,
        })
    }

    /// Space in which every action is feasible in every state.
    pub fn dense(n_states: usize, n_actions: usize) -> Self {
        Self::new(
            n_states,
            n_actions,
            vec![(0..n_actions).collect(); n_states],
        )
        .expect("dense space is always well formed")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Number of feasible state-action pairs.
    pub fn n_pairs(&self) -> usize {
        self.actions.len()
    }

    /// Feasible actions of state `x`.
    pub fn feasible(&self, x: usize) -> &[usize] {
        &self.actions[self.offsets[x]..self.offsets[x + 1]]
    }

    /// Pair index of the first feasible pair of state `x`.
    pub fn pair_offset(&self, x: usize) -> usize {
        self.offsets[x]
    }

    /// Pair index of `(x, a)`, or `None` when `a` is infeasible at `x`.
    pub fn pair_index(&self, x: usize, a: usize) -> Option<usize> {
        self.feasible(x)
            .iter()
            .position(|&b| b == a)
            .map(|pos| self.offsets[x] + pos)
    }

    /// Iterates over all feasible pairs as `(pair_index, state, action)`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.n_states).flat_map(move |x| {
            self.feasible(x)
                .iter()
                .enumerate()
                .map(move |(j, &a)| (self.offsets[x] + j, x, a))
        })
    }

    /// Checks that `sigma` maps every state into its feasible set.
    pub fn check_policy(&self, sigma: &[usize]) -> Result<()> {
        if sigma.len() != self.n_states {
            return Err(DpError::Dimension(format!(
                "policy has {} entries, expected {}",
                sigma.len(),
                self.n_states
            )));
        }
        for (x, &a) in sigma.iter().enumerate() {
            if !self.feasible(x).contains(&a) {
                return Err(DpError::InfeasiblePolicy { state: x, action: a });
            }
        }
        Ok(())
    }

    /// Number of feasible policies `prod_x |Gamma(x)|`, as f64 to avoid overflow.
    pub fn policy_count(&self) -> f64 {
        (0..self.n_states)
            .map(|x| self.feasible(x).len() as f64)
            .product()
    }
}

/// Row-major flattening of a multi-coordinate index space.
///
/// The first coordinate varies slowest. Used by models whose states decode to
/// tuples of grid coordinates.
#[derive(Debug, Clone)]
pub struct IndexProduct {
    dims: Vec<usize>,
}

impl IndexProduct {
    pub fn new(dims: Vec<usize>) -> Self {
        assert!(!dims.is_empty() && dims.iter().all(|&d| d > 0));
        Self { dims }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn flatten(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dims.len());
        let mut idx = 0;
        for (c, d) in coords.iter().zip(&self.dims) {
            debug_assert!(c < d);
            idx = idx * d + c;
        }
        idx
    }

    pub fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        let mut coords = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            coords[k] = idx % self.dims[k];
            idx /= self.dims[k];
        }
        coords
    }
}
