//! JSON model configuration: one object per model type, selected by a
//! `"model"` tag, with grid sizes under a `"grids"` key. Used by the
//! command-line front end; the schema is documented in the repository
//! README.

use std::sync::Arc;

use serde::Deserialize;

use crate::dp::{DynamicProgram, PlanFactorization};
use crate::error::{DpError, Result};
use crate::models::bankruptcy::{build_bankruptcy, BankruptcyGrids, BankruptcyParams};
use crate::models::counterexample::build_counterexample;
use crate::models::finite_mdp::{
    expected_value_factorization, identity_factorization, qfactor_factorization, FiniteMdp,
};
use crate::models::risk_sensitive::{
    build_risk_sensitive, nonmonotone_factorization, RiskSensitiveModel,
};
use crate::models::robust::{build_robust, RobustControlModel};
use crate::models::stopping::{build_stopping, job_search, synthetic_stopping};
use crate::numerics::Grid1D;
use crate::space::StateActionSpace;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelConfig {
    Bankruptcy {
        #[serde(default)]
        params: BankruptcyParams,
        grids: BankruptcyGrids,
    },
    FiniteMdp {
        discount: f64,
        /// One reward row per state (entries align with that state's
        /// feasible actions, all actions when `feasible` is omitted).
        rewards: Vec<Vec<f64>>,
        /// `transitions[x][j]` is the next-state distribution of the `j`-th
        /// feasible action of state `x`.
        transitions: Vec<Vec<Vec<f64>>>,
        feasible: Option<Vec<Vec<usize>>>,
        #[serde(default)]
        factorization: MdpFactorizationKind,
    },
    JobSearch {
        beta: f64,
        grids: JobSearchGrids,
    },
    SyntheticStopping {
        beta: f64,
        grids: StoppingGrids,
    },
    RiskSensitive {
        discount: f64,
        gamma: f64,
        rewards: Vec<Vec<f64>>,
        transitions: Vec<Vec<Vec<f64>>>,
        #[serde(default)]
        nonmonotone: bool,
    },
    Robust {
        theta: f64,
        beta: f64,
        grids: RobustGrids,
    },
    Counterexample {
        beta: f64,
        gamma: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MdpFactorizationKind {
    #[default]
    ExpectedValue,
    Qfactor,
    Identity,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct JobSearchGrids {
    pub w: usize,
    pub eta: usize,
    pub s: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct StoppingGrids {
    pub y: usize,
    pub z: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct RobustGrids {
    pub s: usize,
    pub eps: usize,
}

/// A constructed model paired with its factorization, ready for any solver.
pub struct BuiltModel {
    pub dp: Arc<dyn DynamicProgram>,
    pub pf: Arc<dyn PlanFactorization>,
    pub name: String,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| DpError::Parameter(format!("bad model config: {e}")))
    }

    /// Overrides per-coordinate grid sizes where the model has grids.
    /// A single value is broadcast to every coordinate.
    pub fn override_grids(&mut self, sizes: &[usize]) -> Result<()> {
        let pick = |k: usize| -> Result<usize> {
            if sizes.len() == 1 {
                Ok(sizes[0])
            } else {
                sizes.get(k).copied().ok_or_else(|| {
                    DpError::Parameter(format!(
                        "grid override needs 1 or enough entries, got {sizes:?}"
                    ))
                })
            }
        };
        match self {
            ModelConfig::Bankruptcy { grids, .. } => {
                *grids = BankruptcyGrids {
                    d: pick(0)?,
                    z: pick(1)?,
                    eta: pick(2)?,
                    kappa: pick(3)?,
                };
            }
            ModelConfig::JobSearch { grids, .. } => {
                *grids = JobSearchGrids {
                    w: pick(0)?,
                    eta: pick(1)?,
                    s: pick(2)?,
                };
            }
            ModelConfig::SyntheticStopping { grids, .. } => {
                *grids = StoppingGrids {
                    y: pick(0)?,
                    z: pick(1)?,
                };
            }
            ModelConfig::Robust { grids, .. } => {
                *grids = RobustGrids {
                    s: pick(0)?,
                    eps: pick(1)?,
                };
            }
            _ => {
                return Err(DpError::Parameter(
                    "this model has no grid sizes to override".into(),
                ))
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<BuiltModel> {
        match self {
            ModelConfig::Bankruptcy { params, grids } => {
                let (dp, pf) = build_bankruptcy(params.clone(), *grids)?;
                Ok(BuiltModel {
                    dp,
                    pf: Arc::new(pf),
                    name: "bankruptcy".into(),
                })
            }
            ModelConfig::FiniteMdp {
                discount,
                rewards,
                transitions,
                feasible,
                factorization,
            } => {
                let n_states = rewards.len();
                let feasible = feasible.clone().unwrap_or_else(|| {
                    rewards
                        .iter()
                        .map(|row| (0..row.len()).collect())
                        .collect()
                });
                let n_actions = feasible
                    .iter()
                    .flat_map(|l| l.iter().copied())
                    .max()
                    .map_or(0, |m| m + 1);
                let space = StateActionSpace::new(n_states, n_actions, feasible)?;
                let flat_r: Vec<f64> = rewards.iter().flatten().copied().collect();
                let rows: Vec<Vec<f64>> = transitions.iter().flatten().cloned().collect();
                let mdp = Arc::new(FiniteMdp::new(space, flat_r, rows, *discount)?);
                let pf: Arc<dyn PlanFactorization> = match factorization {
                    MdpFactorizationKind::ExpectedValue => {
                        Arc::new(expected_value_factorization(mdp.clone()))
                    }
                    MdpFactorizationKind::Qfactor => {
                        Arc::new(qfactor_factorization(mdp.clone()))
                    }
                    MdpFactorizationKind::Identity => {
                        Arc::new(identity_factorization(mdp.clone(), true))
                    }
                };
                Ok(BuiltModel {
                    dp: mdp,
                    pf,
                    name: "finite_mdp".into(),
                })
            }
            ModelConfig::JobSearch { beta, grids } => {
                let model = Arc::new(job_search(grids.w, grids.eta, grids.s, *beta)?);
                let (dp, pf) = build_stopping(model);
                Ok(BuiltModel {
                    dp,
                    pf: Arc::new(pf),
                    name: "job_search".into(),
                })
            }
            ModelConfig::SyntheticStopping { beta, grids } => {
                let model = Arc::new(synthetic_stopping(grids.y, grids.z, *beta)?);
                let (dp, pf) = build_stopping(model);
                Ok(BuiltModel {
                    dp,
                    pf: Arc::new(pf),
                    name: "synthetic_stopping".into(),
                })
            }
            ModelConfig::RiskSensitive {
                discount,
                gamma,
                rewards,
                transitions,
                nonmonotone,
            } => {
                let n_states = rewards.len();
                let n_actions = rewards.first().map_or(0, |r| r.len());
                let space = StateActionSpace::dense(n_states, n_actions);
                let flat_r: Vec<f64> = rewards.iter().flatten().copied().collect();
                let rows: Vec<Vec<f64>> = transitions.iter().flatten().cloned().collect();
                let model =
                    Arc::new(RiskSensitiveModel::new(space, flat_r, rows, *discount, *gamma)?);
                let pf: Arc<dyn PlanFactorization> = if *nonmonotone {
                    Arc::new(nonmonotone_factorization(model.clone()))
                } else {
                    let (_, pf) = build_risk_sensitive(model.clone());
                    Arc::new(pf)
                };
                Ok(BuiltModel {
                    dp: model,
                    pf,
                    name: "risk_sensitive".into(),
                })
            }
            ModelConfig::Robust { theta, beta, grids } => {
                let s_grid = Grid1D::equidistant(0.0, 1.0, grids.s)?;
                let eps_grid = Grid1D::equidistant(-0.5, 0.5, grids.eps)?;
                let weights = vec![1.0 / grids.eps as f64; grids.eps];
                let u_grid = Grid1D::equidistant(0.0, 1.0, grids.s)?;
                let model = Arc::new(RobustControlModel::new(
                    s_grid,
                    eps_grid,
                    weights,
                    u_grid,
                    |s, eps, u| -(u - 0.5 * s - 0.3 * eps).powi(2),
                    |_s, u| u,
                    *theta,
                    *beta,
                )?);
                let (dp, pf) = build_robust(model);
                Ok(BuiltModel {
                    dp,
                    pf: Arc::new(pf),
                    name: "robust".into(),
                })
            }
            ModelConfig::Counterexample { beta, gamma } => {
                let model = Arc::new(build_counterexample(*beta, *gamma)?);
                let pf = model.factorization();
                Ok(BuiltModel {
                    dp: model,
                    pf: Arc::new(pf),
                    name: "counterexample".into(),
                })
            }
        }
    }
}
