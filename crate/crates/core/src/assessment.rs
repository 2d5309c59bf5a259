//! Grading practical measurements against the fundamental limit.
//!
//! Any measurement `M` with its Bayes estimator achieves `ε̄_p − K[M]`; the
//! best possible measurement achieves `ε̄_p − J`. Comparing `K` and `J`
//! classifies `M` without searching the space of measurements.

use serde::Serialize;

use crate::error::Result;
use crate::estimation::{operator_moments, OperatorMoments};
use crate::models::{ensure_same_grid, ParameterizedState, Pom, PriorDensity};
use crate::numerics::{solve_lyapunov, trace_product};
use crate::tolerance::Tolerances;

/// Geometric mean of the prior, `θ_u exp(∫ p log(θ/θ_u))`.
pub fn prior_estimate(prior: &PriorDensity, theta_u: f64) -> f64 {
    theta_u * prior.log_moment(1, theta_u).exp()
}

/// Variance of `log θ` under the prior.
pub fn prior_uncertainty(prior: &PriorDensity) -> f64 {
    let center = prior.log_moment(1, 1.0);
    prior.expectation(|t| {
        let d = t.ln() - center;
        d * d
    })
}

/// `K = Σ_x p(x) log²(θ̃(x)/θ̃_p)` with `θ̃(x)` the posterior geometric mean.
pub fn info_gain_k(prior: &PriorDensity, state: &ParameterizedState, pom: &Pom) -> Result<f64> {
    ensure_same_grid(prior.grid(), state.grid())?;
    let tol = Tolerances::default();
    let lik = pom.likelihoods(state)?;
    let masses = prior.masses();
    let center = prior.log_moment(1, 1.0);
    let logs: Vec<f64> = prior
        .grid()
        .nodes()
        .iter()
        .map(|t| t.ln() - center)
        .collect();
    let mut k = 0.0;
    for row in &lik {
        let (mut px, mut acc) = (0.0, 0.0);
        for ((&l, &m), &u) in row.iter().zip(&masses).zip(&logs) {
            px += m * l;
            acc += m * l * u;
        }
        if px < tol.negligible_probability {
            continue;
        }
        let shift = acc / px;
        k += px * shift * shift;
    }
    Ok(k)
}

/// `K` evaluated as `Σ_x Tr[M(x)ρ1]² / Tr[M(x)ρ0]` with moments centred on
/// the prior geometric mean.
pub fn info_gain_k_operator_form(m: &OperatorMoments, pom: &Pom) -> Result<f64> {
    let tol = Tolerances::default();
    let centred = centred(m)?;
    let mut k = 0.0;
    for e in pom.effects() {
        let p0 = e.trace_product(&centred.rho0);
        if p0 < tol.negligible_probability {
            continue;
        }
        let p1 = e.trace_product(&centred.rho1);
        k += p1 * p1 / p0;
    }
    Ok(k)
}

fn centred(m: &OperatorMoments) -> Result<OperatorMoments> {
    let [m0, m1, _] = m.prior_log_moments;
    m.recentered(m.theta_u * (m1 / m0).exp())
}

/// `J = Tr(ρ0 S²)` with moments centred on the prior geometric mean.
pub fn info_gain_j(m: &OperatorMoments) -> Result<f64> {
    let c = centred(m)?;
    let s = solve_lyapunov(&c.rho0, &c.rho1)?;
    Ok(trace_product(c.rho0.matrix(), &(s.matrix() * s.matrix())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Optimal,
    AlmostOptimal,
    SubOptimal,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Optimal => "optimal",
            Classification::AlmostOptimal => "almost_optimal",
            Classification::SubOptimal => "sub_optimal",
        }
    }
}

/// Thresholds on the relative shortfall `(J − K)/J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub tol_rel: f64,
    pub almost_rel: f64,
    /// `J` at or below this value means there is nothing to learn.
    pub zero_abs: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            tol_rel: 1e-6,
            almost_rel: 0.05,
            zero_abs: 1e-15,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AssessmentReport {
    pub epsilon_p: f64,
    pub theta_p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub classification: Classification,
    pub tol_rel: f64,
    pub almost_rel: f64,
}

impl AssessmentReport {
    /// Minimum error implied by the report, `ε̄_p − J`.
    pub fn epsilon_min(&self) -> f64 {
        self.epsilon_p - self.j
    }
}

pub fn classify_values(k: f64, j: f64, th: &Thresholds) -> Classification {
    if j <= th.zero_abs {
        return Classification::Optimal;
    }
    let shortfall = j - k;
    let scale = j.max(1e-300);
    if shortfall <= th.tol_rel * scale {
        Classification::Optimal
    } else if shortfall / scale <= th.almost_rel {
        Classification::AlmostOptimal
    } else {
        Classification::SubOptimal
    }
}

pub fn classify(
    prior: &PriorDensity,
    state: &ParameterizedState,
    pom: &Pom,
    th: &Thresholds,
) -> Result<AssessmentReport> {
    let theta_p = prior_estimate(prior, 1.0);
    let m = operator_moments(prior, state, theta_p)?;
    let k = info_gain_k(prior, state, pom)?;
    let j = info_gain_j(&m)?;
    Ok(AssessmentReport {
        epsilon_p: prior_uncertainty(prior),
        theta_p,
        k,
        j,
        classification: classify_values(k, j, th),
        tol_rel: th.tol_rel,
        almost_rel: th.almost_rel,
    })
}
