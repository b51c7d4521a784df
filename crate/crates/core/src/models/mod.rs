//! Concrete dynamic programs and their plan factorizations.

pub mod bankruptcy;
pub mod config;
pub mod counterexample;
pub mod finite_mdp;
pub mod risk_sensitive;
pub mod robust;
pub mod stopping;

pub use bankruptcy::{build_bankruptcy, BankruptcyGrids, BankruptcyModel, BankruptcyParams};
pub use counterexample::{build_counterexample, CounterexampleModel};
pub use finite_mdp::{
    expected_value_factorization, identity_factorization, qfactor_factorization,
    ExpectedValueFactorization, FiniteMdp, IdentityFactorization, QFactorFactorization,
};
pub use risk_sensitive::{
    build_risk_sensitive, nonmonotone_factorization, RiskSensitiveModel,
};
pub use robust::{build_robust, RobustControlModel};
pub use stopping::{build_stopping, StoppingModel};
