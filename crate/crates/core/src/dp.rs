use crate::space::StateActionSpace;
use crate::tables::{HFn, Policy};

/// An abstract dynamic program over enumerated state and action spaces.
///
/// The aggregator `H(x, a, v)` evaluates the lifetime value of choosing
/// action `a` in state `x` and continuing with the tabulated valuation `v`.
/// It may return minus infinity where a model permits it, and its output is
/// read directly by the Bellman operator with no factorization involved.
///
/// Implementations are immutable after construction and safely shareable
/// across threads.
pub trait DynamicProgram: Send + Sync {
    fn space(&self) -> &StateActionSpace;

    /// H(x, a, v). `v` is indexed by state.
    fn aggregator(&self, state: usize, action: usize, v: &[f64]) -> f64;

    fn discount(&self) -> f64;

    /// Models carrying closed forms may be flagged analytic; this lifts the
    /// solver guard against discount factors of one or above.
    fn is_analytic(&self) -> bool {
        false
    }

    /// A constant lower bound `m` on one-period rewards such that the
    /// constant function `m / (1 - beta)` satisfies `v <= T v`. Used as a
    /// certified start for monotone optimistic policy iteration; models
    /// without one return `None` and the monotone-convergence property is
    /// skipped for them.
    fn reward_lower_bound(&self) -> Option<f64> {
        None
    }

    /// For additively separable finite models, the reward vector `r_sigma`
    /// and dense transition matrix `P_sigma` of a policy, enabling policy
    /// evaluation by a direct linear solve. Other models return `None` and
    /// are evaluated iteratively.
    fn sigma_affine(&self, _sigma: &Policy) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        None
    }
}

/// A plan factorization `(W0, W1)`: `W0` maps state-indexed tables onto the
/// reduced domain and `W1` maps reduced tables back to state-action tables,
/// with `W1 (W0 v) (x, a) = H(x, a, v)` on every feasible pair.
pub trait PlanFactorization: Send + Sync {
    /// Size of the enumerated reduced domain on which refactored functions live.
    fn reduced_len(&self) -> usize;

    /// Declared monotonicity of both `W0` and `W1` with respect to the
    /// pointwise partial order.
    fn is_monotone(&self) -> bool;

    /// `W0`: writes the image of the state-indexed table `v` into `out`
    /// (length [`Self::reduced_len`]).
    fn w0(&self, v: &[f64], out: &mut [f64]);

    /// `W1`: writes the state-action image of the reduced table `g` into the
    /// preallocated pair table `out`.
    fn w1(&self, g: &[f64], out: &mut HFn);
}

impl<D: DynamicProgram + ?Sized> DynamicProgram for &D {
    fn space(&self) -> &StateActionSpace {
        (**self).space()
    }
    fn aggregator(&self, state: usize, action: usize, v: &[f64]) -> f64 {
        (**self).aggregator(state, action, v)
    }
    fn discount(&self) -> f64 {
        (**self).discount()
    }
    fn is_analytic(&self) -> bool {
        (**self).is_analytic()
    }
    fn reward_lower_bound(&self) -> Option<f64> {
        (**self).reward_lower_bound()
    }
    fn sigma_affine(&self, sigma: &Policy) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        (**self).sigma_affine(sigma)
    }
}
