//! Priors over a scale parameter, parameter-encoded states, measurements and estimators.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, min_eigenvalue, Grid, HermitianOperator};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Jeffreys,
    LogNormal,
    Flat,
    FlatInLog,
    Custom,
}

/// Probability density sampled on a quadrature grid, normalized so that
/// `Σ_j w_j p(θ_j) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDensity {
    grid: Grid,
    values: Vec<f64>,
    kind: PriorKind,
}

impl PriorDensity {
    /// Normalizes `values` on `grid`.
    pub fn new(grid: Grid, values: Vec<f64>, kind: PriorKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(format!(
                "prior has {} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::validation(
                "prior values must be finite and nonnegative",
            ));
        }
        let mass: f64 = grid.weights().iter().zip(&values).map(|(w, p)| w * p).sum();
        if !mass.is_finite() || mass <= 0.0 {
            return Err(Error::validation("prior has zero mass on the grid"));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Ok(PriorDensity { grid, values, kind })
    }

    pub fn custom(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values, PriorKind::Custom)
    }

    /// All prior mass on node `index`.
    pub fn delta(grid: Grid, index: usize) -> Result<Self> {
        if index >= grid.len() || grid.weights()[index] <= 0.0 {
            return Err(Error::validation(
                "delta prior needs a node with positive weight",
            ));
        }
        let mut values = vec![0.0; grid.len()];
        values[index] = 1.0;
        Self::new(grid, values, PriorKind::Custom)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    /// Probability mass `w_j p(θ_j)` carried by each node.
    pub fn masses(&self) -> Vec<f64> {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, p)| w * p)
            .collect()
    }

    /// `Σ_j w_j p(θ_j) f(θ_j)`.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.grid
            .nodes()
            .iter()
            .zip(self.grid.weights())
            .zip(&self.values)
            .map(|((&t, &w), &p)| if p == 0.0 { 0.0 } else { w * p * f(t) })
            .sum()
    }

    /// `∫ p(θ) log^k(θ/θ_u) dθ`.
    pub fn log_moment(&self, k: i32, theta_u: f64) -> f64 {
        self.expectation(|t| (t / theta_u).ln().powi(k))
    }

    /// Density at an arbitrary point of the support.
    ///
    /// Jeffreys and flat-in-log priors are evaluated in closed form (`c/θ`);
    /// other kinds interpolate linearly in `log θ` between nodes. Returns
    /// `None` outside the support.
    pub fn eval(&self, theta: f64) -> Option<f64> {
        if !self.grid.contains(theta) {
            return None;
        }
        let nodes = self.grid.nodes();
        match self.kind {
            PriorKind::Jeffreys | PriorKind::FlatInLog => {
                let c = self.values[0] * nodes[0];
                Some(c / theta)
            }
            _ => {
                let n = nodes.len();
                if theta <= nodes[0] {
                    return Some(self.values[0]);
                }
                if theta >= nodes[n - 1] {
                    return Some(self.values[n - 1]);
                }
                let k = nodes.partition_point(|&t| t <= theta).max(1);
                let (a, b) = (nodes[k - 1].ln(), nodes[k].ln());
                let s = (theta.ln() - a) / (b - a);
                Some(self.values[k - 1] * (1.0 - s) + self.values[k] * s)
            }
        }
    }

    /// The prior of `γΘ`: density `p(θ/γ)/γ` on the rescaled grid.
    pub fn rescaled(&self, gamma: f64) -> Result<Self> {
        let grid = self.grid.scaled(gamma)?;
        let values = self.values.iter().map(|p| p / gamma).collect();
        Ok(PriorDensity {
            grid,
            values,
            kind: self.kind,
        })
    }

    /// Same grid, new (unnormalized) values; used by Bayesian updates.
    pub(crate) fn reweighted(&self, factors: &[f64]) -> Result<Self> {
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(factors)
            .map(|(p, f)| p * f)
            .collect();
        Self::new(self.grid.clone(), values, PriorKind::Custom)
    }
}

/// Truncated Jeffreys prior `p(θ) ∝ 1/θ`.
pub fn jeffreys_prior(grid: &Grid) -> PriorDensity {
    let values = grid.nodes().iter().map(|t| 1.0 / t).collect();
    PriorDensity::new(grid.clone(), values, PriorKind::Jeffreys)
        .expect("1/θ is positive on a valid grid")
}

/// Uniform density in `log θ`; numerically the same law as [`jeffreys_prior`].
pub fn flat_in_log_prior(grid: &Grid) -> PriorDensity {
    let values = grid.nodes().iter().map(|t| 1.0 / t).collect();
    PriorDensity::new(grid.clone(), values, PriorKind::FlatInLog)
        .expect("1/θ is positive on a valid grid")
}

/// Uniform density in θ over the grid support.
pub fn flat_prior(grid: &Grid) -> PriorDensity {
    PriorDensity::new(grid.clone(), vec![1.0; grid.len()], PriorKind::Flat)
        .expect("flat prior is positive")
}

/// Log-normal density with `log θ ~ N(mu, sigma²)`, truncated to the grid.
pub fn log_normal_prior(grid: &Grid, mu: f64, sigma: f64) -> Result<PriorDensity> {
    if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
        return Err(Error::validation(
            "log-normal prior needs finite mu and sigma > 0",
        ));
    }
    let values = grid
        .nodes()
        .iter()
        .map(|t| {
            let z = (t.ln() - mu) / sigma;
            (-0.5 * z * z).exp() / t
        })
        .collect();
    PriorDensity::new(grid.clone(), values, PriorKind::LogNormal)
}

/// Table of density matrices `ρ(θ_j)`, one per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterizedState {
    grid: Grid,
    states: Vec<HermitianOperator>,
}

impl ParameterizedState {
    pub fn new(grid: Grid, states: Vec<HermitianOperator>) -> Result<Self> {
        let tol = Tolerances::default();
        if states.len() != grid.len() {
            return Err(Error::validation(format!(
                "{} states for {} grid nodes",
                states.len(),
                grid.len()
            )));
        }
        let dim = states[0].dim();
        for (j, rho) in states.iter().enumerate() {
            check_density_matrix(rho, dim, &tol).map_err(|e| match e {
                Error::Validation(m) => Error::validation(format!("state at node {j}: {m}")),
                other => other,
            })?;
        }
        Ok(ParameterizedState { grid, states })
    }

    /// `ρ(θ) = ρ` for every node.
    pub fn constant(grid: &Grid, rho: HermitianOperator) -> Result<Self> {
        Self::new(grid.clone(), vec![rho; grid.len()])
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, states: Vec<HermitianOperator>) -> Self {
        ParameterizedState { grid, states }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn states(&self) -> &[HermitianOperator] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// The same table of states attached to the grid of `γΘ`.
    pub fn rescaled(&self, gamma: f64) -> Result<Self> {
        Ok(ParameterizedState {
            grid: self.grid.scaled(gamma)?,
            states: self.states.clone(),
        })
    }
}

pub(crate) fn check_density_matrix(
    rho: &HermitianOperator,
    dim: usize,
    tol: &Tolerances,
) -> Result<()> {
    if rho.dim() != dim {
        return Err(Error::validation(format!(
            "dimension {} differs from {}",
            rho.dim(),
            dim
        )));
    }
    let tr = rho.trace();
    if (tr - 1.0).abs() > tol.trace {
        return Err(Error::validation(format!("trace {tr} is not one")));
    }
    let m = min_eigenvalue(rho);
    if m < -tol.psd {
        return Err(Error::validation(format!(
            "not positive semidefinite (min eigenvalue {m:e})"
        )));
    }
    Ok(())
}

/// Positivity and completeness report for a candidate set of effects.
#[derive(Debug, Clone, Serialize)]
pub struct PomDiagnostics {
    /// Smallest eigenvalue of each effect.
    pub psd_margins: Vec<f64>,
    /// `‖Σ_x M(x) − I‖_F`.
    pub completeness_residual: f64,
    pub valid: bool,
}

pub fn check_pom(effects: &[HermitianOperator]) -> PomDiagnostics {
    let tol = Tolerances::default();
    if effects.is_empty() {
        return PomDiagnostics {
            psd_margins: vec![],
            completeness_residual: f64::INFINITY,
            valid: false,
        };
    }
    let dim = effects[0].dim();
    if effects.iter().any(|e| e.dim() != dim) {
        return PomDiagnostics {
            psd_margins: vec![],
            completeness_residual: f64::INFINITY,
            valid: false,
        };
    }
    let psd_margins: Vec<f64> = effects.iter().map(min_eigenvalue).collect();
    let total = effects
        .iter()
        .fold(HermitianOperator::zeros(dim), |acc, e| acc.add(e));
    let completeness_residual = total
        .sub(&HermitianOperator::identity(dim))
        .frobenius_norm();
    let valid =
        psd_margins.iter().all(|m| *m >= -tol.psd) && completeness_residual <= tol.completeness;
    PomDiagnostics {
        psd_margins,
        completeness_residual,
        valid,
    }
}

/// Probability-operator measurement: positive effects resolving the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Pom {
    labels: Vec<String>,
    effects: Vec<HermitianOperator>,
}

impl Pom {
    pub fn new(labels: Vec<String>, effects: Vec<HermitianOperator>) -> Result<Self> {
        if labels.len() != effects.len() {
            return Err(Error::validation(format!(
                "POM has {} labels for {} effects",
                labels.len(),
                effects.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::validation(format!("duplicate POM label {l:?}")));
            }
        }
        let diag = check_pom(&effects);
        if !diag.valid {
            return Err(Error::validation(format!(
                "invalid POM: completeness residual {:e}, min effect eigenvalue {:e}",
                diag.completeness_residual,
                diag.psd_margins
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min)
            )));
        }
        Ok(Pom { labels, effects })
    }

    /// Single-outcome measurement `{I}`, labelled `"1"`.
    pub fn trivial(dim: usize) -> Self {
        Pom {
            labels: vec!["1".into()],
            effects: vec![HermitianOperator::identity(dim)],
        }
    }

    /// Projective measurement in the computational basis, labels `"0"`, `"1"`, ...
    pub fn computational_basis(dim: usize) -> Self {
        let effects = (0..dim)
            .map(|k| {
                let mut d = vec![0.0; dim];
                d[k] = 1.0;
                HermitianOperator::from_real_diagonal(&d)
            })
            .collect();
        Pom {
            labels: (0..dim).map(|k| k.to_string()).collect(),
            effects,
        }
    }

    /// Projective measurement in the discrete Fourier basis, labels `"f0"`, `"f1"`, ...
    /// Every effect has constant diagonal `1/dim`, so outcomes carry no
    /// information about any family of states diagonal in the computational basis.
    pub fn fourier_basis(dim: usize) -> Self {
        let effects = (0..dim)
            .map(|k| {
                let v: Vec<Complex64> = (0..dim)
                    .map(|j| {
                        let phase = 2.0 * std::f64::consts::PI * (j * k) as f64 / dim as f64;
                        Complex64::from_polar(1.0 / (dim as f64).sqrt(), phase)
                    })
                    .collect();
                HermitianOperator::projector(&v).expect("Fourier vectors are nonzero")
            })
            .collect();
        Pom {
            labels: (0..dim).map(|k| format!("f{k}")).collect(),
            effects,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::validation(format!("unknown outcome label {label:?}")))
    }

    /// Born-rule table `p[x][j] = Tr[M(x) ρ(θ_j)]`, clamped at zero.
    pub fn likelihoods(&self, state: &ParameterizedState) -> Result<Vec<Vec<f64>>> {
        if state.dim() != self.dim() {
            return Err(Error::validation(format!(
                "POM dimension {} differs from state dimension {}",
                self.dim(),
                state.dim()
            )));
        }
        Ok(self
            .effects
            .iter()
            .map(|m| {
                state
                    .states()
                    .iter()
                    .map(|rho| m.trace_product(rho).max(0.0))
                    .collect()
            })
            .collect())
    }

    /// Outcome labels and effects after applying a permutation.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        Pom::new(
            order.iter().map(|&k| self.labels[k].clone()).collect(),
            order.iter().map(|&k| self.effects[k].clone()).collect(),
        )
    }

    /// Whether every effect is an orthogonal projector.
    pub fn is_projective(&self, tol: f64) -> bool {
        self.effects.iter().all(|m| {
            let sq = m.matrix() * m.matrix();
            (sq - m.matrix()).norm() <= tol
        })
    }

    /// Eigenvalue spread per effect; handy in diagnostics.
    pub fn effect_spectra(&self) -> Vec<Vec<f64>> {
        self.effects
            .iter()
            .map(|m| eig_hermitian(m).map(|e| e.values).unwrap_or_default())
            .collect()
    }
}

/// Positive point estimate attached to each outcome label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    estimates: BTreeMap<String, f64>,
}

impl Estimator {
    pub fn new(estimates: BTreeMap<String, f64>) -> Result<Self> {
        if let Some((l, v)) = estimates
            .iter()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::validation(format!(
                "estimate for outcome {l:?} must be finite and positive, got {v}"
            )));
        }
        Ok(Estimator { estimates })
    }

    /// Estimates listed in the order of `pom`'s labels.
    pub fn for_pom(pom: &Pom, values: &[f64]) -> Result<Self> {
        if values.len() != pom.len() {
            return Err(Error::validation(
                "one estimate per POM outcome is required",
            ));
        }
        Self::new(
            pom.labels()
                .iter()
                .cloned()
                .zip(values.iter().copied())
                .collect(),
        )
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.estimates.get(label).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.estimates.iter()
    }

    /// Estimates in the order of `pom`'s labels; errors if a label is missing.
    pub fn values_for(&self, pom: &Pom) -> Result<Vec<f64>> {
        pom.labels()
            .iter()
            .map(|l| {
                self.get(l).ok_or_else(|| {
                    Error::validation(format!("estimator has no value for outcome {l:?}"))
                })
            })
            .collect()
    }

    pub fn scaled(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.estimates
                .iter()
                .map(|(k, v)| (k.clone(), v * gamma))
                .collect(),
        )
    }
}

pub(crate) fn ensure_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a.matches(b) {
        Ok(())
    } else {
        Err(Error::validation(
            "prior and state are defined on different grids",
        ))
    }
}

/// Bayes update `p(θ|x) ∝ p(θ) Tr[M(x) ρ(θ)]` on the grid.
pub fn posterior(
    prior: &PriorDensity,
    state: &ParameterizedState,
    pom: &Pom,
    outcome: &str,
) -> Result<PriorDensity> {
    ensure_same_grid(prior.grid(), state.grid())?;
    let x = pom.index_of(outcome)?;
    if state.dim() != pom.dim() {
        return Err(Error::validation("POM and state dimensions differ"));
    }
    let effect = &pom.effects()[x];
    let lik: Vec<f64> = state
        .states()
        .iter()
        .map(|rho| effect.trace_product(rho).max(0.0))
        .collect();
    posterior_from_likelihood(prior, &lik, outcome)
}

pub(crate) fn posterior_from_likelihood(
    prior: &PriorDensity,
    likelihood: &[f64],
    outcome: &str,
) -> Result<PriorDensity> {
    let evidence: f64 = prior
        .masses()
        .iter()
        .zip(likelihood)
        .map(|(m, l)| m * l)
        .sum();
    if evidence.is_nan() || evidence <= 0.0 {
        return Err(Error::numerical(format!(
            "outcome {outcome:?} has zero probability under the prior"
        )));
    }
    prior.reweighted(likelihood)
}
