use serde::{Deserialize, Serialize};

use crate::space::StateActionSpace;

/// Tabulated candidate value function: one real per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFn(pub Vec<f64>);

/// Tabulated function on the reduced domain of a plan factorization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefactoredFn(pub Vec<f64>);

/// Tabulated function on the feasible state-action pairs, flattened in the
/// pair order of the owning [`StateActionSpace`]. Entries may be minus
/// infinity where a model permits it; minus infinity loses every comparison
/// and propagates through addition.
#[derive(Debug, Clone, PartialEq)]
pub struct HFn {
    pub values: Vec<f64>,
}

/// A feasible stationary policy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy(pub Vec<usize>);

impl ValueFn {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl RefactoredFn {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl HFn {
    /// Allocates an all-zero table matching the pair layout of `space`.
    pub fn zeros(space: &StateActionSpace) -> Self {
        Self {
            values: vec![0.0; space.n_pairs()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Entry for the `j`-th feasible action of state `x`.
    pub fn at(&self, space: &StateActionSpace, x: usize, j: usize) -> f64 {
        self.values[space.pair_offset(x) + j]
    }
}

impl Policy {
    pub fn action(&self, x: usize) -> usize {
        self.0[x]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Order-sensitive FNV-1a hash of the action-index vector, used by the
    /// benchmark harness to certify that two solvers reached the same policy.
    pub fn fnv1a_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for &a in &self.0 {
            for byte in (a as u64).to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}

/// Supremum-norm distance between two equally sized tables.
pub fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Supremum norm of a table.
pub fn sup_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
