//! Bayesian estimation of scale parameters encoded in finite-dimensional
//! quantum states.
//!
//! Given a prior over a positive parameter and a table of states `ρ(θ)`, the
//! crate computes the minimum achievable mean logarithmic error, the
//! measurement and estimator attaining it, information-gain scores for
//! arbitrary measurements, multi-shot protocols and a multi-parameter bound.
//!
//! ```
//! use qse_core::{flat_in_log_prior, make_log_grid, minimum_error, operator_moments};
//! use qse_core::thermometry::{thermal_state_family, HamiltonianSpec};
//!
//! let grid = make_log_grid(0.1, 10.0, 200).unwrap();
//! let prior = flat_in_log_prior(&grid);
//! let h = HamiltonianSpec::new(vec![0.0, 1.0], 1.0).unwrap();
//! let state = thermal_state_family(&h, &grid).unwrap();
//! let m = operator_moments(&prior, &state, 1.0).unwrap();
//! let report = minimum_error(&m).unwrap();
//! assert!(report.epsilon_min > 0.0 && report.epsilon_min < report.prior_term);
//! ```

pub mod assessment;
pub mod error;
pub mod estimation;
pub mod io;
pub mod models;
pub mod multiparam;
pub mod multishot;
pub mod numerics;
pub mod random;
pub mod thermometry;
pub mod tolerance;

pub use assessment::{
    classify, info_gain_j, info_gain_k, info_gain_k_operator_form, prior_estimate,
    prior_uncertainty, AssessmentReport, Classification, Thresholds,
};
pub use error::{Error, Result};
pub use estimation::{
    bayes_estimator, evaluate_mle, hh_certificate, jensen_gap, minimum_error, operator_moments,
    optimal_strategy, scale_observable, variational_objective, Certificate, MinimumReport,
    OperatorMoments, OptimalStrategy,
};
pub use models::{
    flat_in_log_prior, flat_prior, jeffreys_prior, log_normal_prior, posterior, Estimator,
    ParameterizedState, Pom, PriorDensity, PriorKind,
};
pub use numerics::{make_log_grid, solve_lyapunov, Grid, HermitianOperator};
pub use tolerance::Tolerances;
