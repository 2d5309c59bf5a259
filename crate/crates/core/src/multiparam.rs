//! Joint estimation of several scale parameters.
//!
//! Each parameter gets its own first moment `ρ1_i` and Lyapunov solution
//! `S_i` against the shared `ρ0`; the average of the per-parameter minima
//! bounds the averaged mean logarithmic error of any joint measurement. The
//! bound is attainable when the `S_i` commute.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{
    check_density_matrix, Estimator, ParameterizedState, Pom, PriorDensity, PriorKind,
};
use crate::numerics::{solve_lyapunov, trace_product, CMatrix, Grid, HermitianOperator};
use crate::tolerance::Tolerances;

/// Largest product grid accepted.
pub const MAX_PRODUCT_NODES: usize = 1_000_000;

fn product_len(grids: &[Grid]) -> Result<usize> {
    if grids.is_empty() {
        return Err(Error::validation("at least one parameter is required"));
    }
    let mut n: usize = 1;
    for g in grids {
        n = n
            .checked_mul(g.len())
            .filter(|n| *n <= MAX_PRODUCT_NODES)
            .ok_or_else(|| {
                Error::validation(format!("product grid exceeds {MAX_PRODUCT_NODES} nodes"))
            })?;
    }
    Ok(n)
}

/// Row-major multi-index of flat node `k` (last parameter varies fastest).
fn unflatten(mut k: usize, sizes: &[usize], out: &mut [usize]) {
    for i in (0..sizes.len()).rev() {
        out[i] = k % sizes[i];
        k /= sizes[i];
    }
}

/// Joint density on the Cartesian product of per-parameter grids, normalized
/// against the product weights.
#[derive(Debug, Clone)]
pub struct MultiPrior {
    grids: Vec<Grid>,
    values: Vec<f64>,
    marginals: Option<Vec<PriorDensity>>,
}

impl MultiPrior {
    /// `p(θ⃗) = Π_i p_i(θ_i)`.
    pub fn separable(marginals: Vec<PriorDensity>) -> Result<Self> {
        let grids: Vec<Grid> = marginals.iter().map(|m| m.grid().clone()).collect();
        let n = product_len(&grids)?;
        let sizes: Vec<usize> = grids.iter().map(Grid::len).collect();
        let mut idx = vec![0; sizes.len()];
        let values = (0..n)
            .map(|k| {
                unflatten(k, &sizes, &mut idx);
                idx.iter()
                    .zip(&marginals)
                    .map(|(&j, m)| m.values()[j])
                    .product()
            })
            .collect();
        Ok(MultiPrior {
            grids,
            values,
            marginals: Some(marginals),
        })
    }

    /// Product of Jeffreys priors, the scale-invariant choice for every parameter.
    pub fn jeffreys_product(grids: &[Grid]) -> Result<Self> {
        Self::separable(grids.iter().map(crate::models::jeffreys_prior).collect())
    }

    /// Arbitrary joint density in row-major node order; normalized here.
    pub fn custom(grids: Vec<Grid>, values: Vec<f64>) -> Result<Self> {
        let n = product_len(&grids)?;
        if values.len() != n {
            return Err(Error::validation(format!(
                "{} joint values for {n} product nodes",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::validation(
                "joint prior values must be finite and nonnegative",
            ));
        }
        let mut p = MultiPrior {
            grids,
            values,
            marginals: None,
        };
        let mass: f64 = p.weights().iter().zip(&p.values).map(|(w, v)| w * v).sum();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::validation("joint prior has zero mass"));
        }
        p.values.iter_mut().for_each(|v| *v /= mass);
        Ok(p)
    }

    pub fn params(&self) -> usize {
        self.grids.len()
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_separable(&self) -> bool {
        self.marginals.is_some()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn sizes(&self) -> Vec<usize> {
        self.grids.iter().map(Grid::len).collect()
    }

    /// Parameter vector at flat node `k`.
    pub fn node(&self, k: usize) -> Vec<f64> {
        let sizes = self.sizes();
        let mut idx = vec![0; sizes.len()];
        unflatten(k, &sizes, &mut idx);
        idx.iter()
            .zip(&self.grids)
            .map(|(&j, g)| g.nodes()[j])
            .collect()
    }

    /// Product quadrature weight of every node.
    pub fn weights(&self) -> Vec<f64> {
        let sizes = self.sizes();
        let mut idx = vec![0; sizes.len()];
        (0..self.values.len())
            .map(|k| {
                unflatten(k, &sizes, &mut idx);
                idx.iter()
                    .zip(&self.grids)
                    .map(|(&j, g)| g.weights()[j])
                    .product()
            })
            .collect()
    }

    /// Probability mass of every node.
    pub fn masses(&self) -> Vec<f64> {
        self.weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .collect()
    }

    /// Marginal density of parameter `i`.
    pub fn marginal(&self, i: usize) -> Result<PriorDensity> {
        if let Some(m) = &self.marginals {
            return m
                .get(i)
                .cloned()
                .ok_or_else(|| Error::validation(format!("parameter index {i} out of range")));
        }
        if i >= self.params() {
            return Err(Error::validation(format!(
                "parameter index {i} out of range"
            )));
        }
        let sizes = self.sizes();
        let mut idx = vec![0; sizes.len()];
        let mut acc = vec![0.0; sizes[i]];
        let own = self.grids[i].weights();
        for (k, m) in self.masses().into_iter().enumerate() {
            unflatten(k, &sizes, &mut idx);
            acc[idx[i]] += m / own[idx[i]];
        }
        PriorDensity::new(self.grids[i].clone(), acc, PriorKind::Custom)
    }

    /// Joint density at a point. Separable priors evaluate each marginal
    /// (closed form for Jeffreys); otherwise the value of the nearest node.
    pub fn eval(&self, theta: &[f64]) -> Option<f64> {
        if theta.len() != self.params() {
            return None;
        }
        if theta.iter().zip(&self.grids).any(|(&t, g)| !g.contains(t)) {
            return None;
        }
        match &self.marginals {
            Some(ms) => ms.iter().zip(theta).map(|(m, &t)| m.eval(t)).product(),
            None => {
                let sizes = self.sizes();
                let mut k = 0;
                for ((&t, g), &n) in theta.iter().zip(&self.grids).zip(&sizes) {
                    k = k * n + g.nearest_node(t);
                }
                Some(self.values[k])
            }
        }
    }

    /// Prior of `(γ_1Θ_1, …, γ_dΘ_d)`.
    pub fn rescaled(&self, gammas: &[f64]) -> Result<Self> {
        if gammas.len() != self.params() {
            return Err(Error::validation(
                "one scale factor per parameter is required",
            ));
        }
        match &self.marginals {
            Some(ms) => Self::separable(
                ms.iter()
                    .zip(gammas)
                    .map(|(m, &g)| m.rescaled(g))
                    .collect::<Result<_>>()?,
            ),
            None => {
                let grids = self
                    .grids
                    .iter()
                    .zip(gammas)
                    .map(|(g, &c)| g.scaled(c))
                    .collect::<Result<_>>()?;
                let jac: f64 = gammas.iter().product();
                Ok(MultiPrior {
                    grids,
                    values: self.values.iter().map(|v| v / jac).collect(),
                    marginals: None,
                })
            }
        }
    }
}

/// Encoded state at every node of a product grid.
#[derive(Debug, Clone)]
pub struct ProductState {
    grids: Vec<Grid>,
    states: Vec<HermitianOperator>,
}

impl ProductState {
    pub fn new(grids: Vec<Grid>, states: Vec<HermitianOperator>) -> Result<Self> {
        let n = product_len(&grids)?;
        if states.len() != n {
            return Err(Error::validation(format!(
                "{} states for {n} product nodes",
                states.len()
            )));
        }
        let tol = Tolerances::default();
        let dim = states[0].dim();
        for (k, rho) in states.iter().enumerate() {
            check_density_matrix(rho, dim, &tol).map_err(|e| match e {
                Error::Validation(m) => {
                    Error::validation(format!("state at product node {k}: {m}"))
                }
                other => other,
            })?;
        }
        Ok(ProductState { grids, states })
    }

    /// Builds the table by evaluating `f` at every parameter vector.
    pub fn from_fn(grids: Vec<Grid>, f: impl Fn(&[f64]) -> HermitianOperator) -> Result<Self> {
        let n = product_len(&grids)?;
        let sizes: Vec<usize> = grids.iter().map(Grid::len).collect();
        let mut idx = vec![0; sizes.len()];
        let mut theta = vec![0.0; sizes.len()];
        let mut states = Vec::with_capacity(n);
        for k in 0..n {
            unflatten(k, &sizes, &mut idx);
            for i in 0..sizes.len() {
                theta[i] = grids[i].nodes()[idx[i]];
            }
            states.push(f(&theta));
        }
        Self::new(grids, states)
    }

    /// `ρ(θ⃗) = ρ_1(θ_1) ⊗ … ⊗ ρ_d(θ_d)`.
    pub fn tensor(families: &[ParameterizedState]) -> Result<Self> {
        let grids: Vec<Grid> = families.iter().map(|f| f.grid().clone()).collect();
        let n = product_len(&grids)?;
        let sizes: Vec<usize> = grids.iter().map(Grid::len).collect();
        let mut idx = vec![0; sizes.len()];
        let states = (0..n)
            .map(|k| {
                unflatten(k, &sizes, &mut idx);
                let mut rho = families[0].states()[idx[0]].clone();
                for (f, &j) in families.iter().zip(&idx).skip(1) {
                    rho = rho.kron(&f.states()[j]);
                }
                rho
            })
            .collect();
        Ok(ProductState { grids, states })
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    pub fn states(&self) -> &[HermitianOperator] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    fn check_against(&self, prior: &MultiPrior) -> Result<()> {
        let same = self.grids.len() == prior.grids.len()
            && self
                .grids
                .iter()
                .zip(&prior.grids)
                .all(|(a, b)| a.matches(b));
        if same {
            Ok(())
        } else {
            Err(Error::validation(
                "prior and state are defined on different product grids",
            ))
        }
    }

    fn likelihoods(&self, pom: &Pom) -> Result<Vec<Vec<f64>>> {
        if pom.dim() != self.dim() {
            return Err(Error::validation(format!(
                "POM dimension {} differs from state dimension {}",
                pom.dim(),
                self.dim()
            )));
        }
        Ok(pom
            .effects()
            .par_iter()
            .map(|m| {
                self.states
                    .iter()
                    .map(|rho| m.trace_product(rho).max(0.0))
                    .collect()
            })
            .collect())
    }
}

/// Tensor product of measurements; outcome labels joined with `|`.
pub fn product_pom(poms: &[Pom]) -> Result<Pom> {
    let (first, rest) = poms
        .split_first()
        .ok_or_else(|| Error::validation("product_pom needs at least one POM"))?;
    let mut labels = first.labels().to_vec();
    let mut effects = first.effects().to_vec();
    for p in rest {
        let mut l2 = Vec::with_capacity(labels.len() * p.len());
        let mut e2 = Vec::with_capacity(labels.len() * p.len());
        for (la, ea) in labels.iter().zip(&effects) {
            for (lb, eb) in p.labels().iter().zip(p.effects()) {
                l2.push(format!("{la}|{lb}"));
                e2.push(ea.kron(eb));
            }
        }
        labels = l2;
        effects = e2;
    }
    Pom::new(labels, effects)
}

/// `(1/d) Σ_i log²(θ̃_i/θ_i)`.
pub fn multi_deviation(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() || estimates.is_empty() {
        return Err(Error::validation(
            "estimates and truths must have the same nonzero length",
        ));
    }
    if estimates
        .iter()
        .chain(truths)
        .any(|x| !(x.is_finite() && *x > 0.0))
    {
        return Err(Error::validation(
            "estimates and truths must be positive and finite",
        ));
    }
    let d = estimates.len() as f64;
    Ok(estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| (e / t).ln().powi(2))
        .sum::<f64>()
        / d)
}

/// Shared `ρ0`, per-parameter `ρ1_i`, reference scales and Lyapunov solutions.
#[derive(Debug, Clone)]
pub struct MultiMomentSet {
    pub rho0: HermitianOperator,
    pub rho1: Vec<HermitianOperator>,
    pub theta_u: Vec<f64>,
    pub s: Vec<HermitianOperator>,
}

impl MultiMomentSet {
    pub fn params(&self) -> usize {
        self.rho1.len()
    }
}

pub fn multi_moments(
    prior: &MultiPrior,
    state: &ProductState,
    theta_u: &[f64],
) -> Result<MultiMomentSet> {
    state.check_against(prior)?;
    let d = prior.params();
    if theta_u.len() != d {
        return Err(Error::validation(format!(
            "{} reference scales for {d} parameters",
            theta_u.len()
        )));
    }
    if theta_u.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::validation(
            "reference scales must be positive and finite",
        ));
    }
    let dim = state.dim();
    let masses = prior.masses();
    let zero = || CMatrix::zeros(dim, dim);
    // Node-parallel accumulation of ρ0 and every ρ1_i.
    let acc = masses
        .par_iter()
        .enumerate()
        .fold(
            || vec![zero(); d + 1],
            |mut acc, (k, &m)| {
                if m != 0.0 {
                    let theta = prior.node(k);
                    let rho = state.states[k].matrix();
                    acc[0].zip_apply(rho, |s, v| *s += v * m);
                    for i in 0..d {
                        let l = (theta[i] / theta_u[i]).ln();
                        acc[i + 1].zip_apply(rho, |s, v| *s += v * (m * l));
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![zero(); d + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let mut ops = acc.into_iter().map(HermitianOperator::symmetrized);
    let rho0 = ops.next().expect("rho0 accumulated");
    let rho1: Vec<HermitianOperator> = ops.collect();
    let s = rho1
        .par_iter()
        .map(|r1| solve_lyapunov(&rho0, r1))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiMomentSet {
        rho0,
        rho1,
        theta_u: theta_u.to_vec(),
        s,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiBoundReport {
    /// `∫ p log²(θ_i/θ_u,i) − Tr(ρ0 S_i²)` for each parameter.
    pub per_parameter: Vec<f64>,
    /// Mean of the per-parameter terms.
    pub bound: f64,
    /// `(i, j, ‖[S_i, S_j]‖_F)` for every pair `i < j`.
    pub commutator_norms: Vec<(usize, usize, f64)>,
    pub saturable: bool,
}

impl MultiBoundReport {
    pub fn max_commutator(&self) -> f64 {
        self.commutator_norms
            .iter()
            .map(|c| c.2)
            .fold(0.0, f64::max)
    }
}

pub fn multi_bound(ms: &MultiMomentSet, prior: &MultiPrior) -> Result<MultiBoundReport> {
    let d = ms.params();
    if prior.params() != d {
        return Err(Error::validation(
            "moment set and prior have different parameter counts",
        ));
    }
    let masses = prior.masses();
    let mut per_parameter = Vec::with_capacity(d);
    for i in 0..d {
        let prior_term: f64 = masses
            .iter()
            .enumerate()
            .filter(|(_, m)| **m != 0.0)
            .map(|(k, m)| m * (prior.node(k)[i] / ms.theta_u[i]).ln().powi(2))
            .sum();
        let s = ms.s[i].matrix();
        per_parameter.push(prior_term - trace_product(ms.rho0.matrix(), &(s * s)));
    }
    let bound = per_parameter.iter().sum::<f64>() / d as f64;

    let mut commutator_norms = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let (a, b) = (ms.s[i].matrix(), ms.s[j].matrix());
            commutator_norms.push((i, j, (a * b - b * a).norm()));
        }
    }
    let smax =
        ms.s.iter()
            .map(HermitianOperator::frobenius_norm)
            .fold(0.0, f64::max);
    let max_comm = commutator_norms.iter().map(|c| c.2).fold(0.0, f64::max);
    Ok(MultiBoundReport {
        per_parameter,
        bound,
        commutator_norms,
        saturable: max_comm <= 1e-8 * smax * smax,
    })
}

/// Per-parameter posterior geometric means for every outcome of `pom`.
pub fn multi_bayes_estimators(
    prior: &MultiPrior,
    state: &ProductState,
    pom: &Pom,
) -> Result<Vec<Estimator>> {
    state.check_against(prior)?;
    let tol = Tolerances::default();
    let lik = state.likelihoods(pom)?;
    let masses = prior.masses();
    let d = prior.params();
    let logs: Vec<Vec<f64>> = (0..masses.len())
        .map(|k| prior.node(k).iter().map(|t| t.ln()).collect())
        .collect();
    let centers: Vec<f64> = (0..d)
        .map(|i| masses.iter().zip(&logs).map(|(m, l)| m * l[i]).sum())
        .collect();
    let mut maps = vec![BTreeMap::new(); d];
    for (label, row) in pom.labels().iter().zip(&lik) {
        let px: f64 = row.iter().zip(&masses).map(|(l, m)| l * m).sum();
        for i in 0..d {
            let log_est = if px > tol.negligible_probability {
                let acc: f64 = row
                    .iter()
                    .zip(&masses)
                    .zip(&logs)
                    .map(|((l, m), lg)| l * m * (lg[i] - centers[i]))
                    .sum();
                centers[i] + acc / px
            } else {
                centers[i]
            };
            maps[i].insert(label.clone(), log_est.exp());
        }
    }
    maps.into_iter().map(Estimator::new).collect()
}

/// `(1/d) Σ_i Σ_x ∫ p(θ⃗) Tr[M(x) ρ(θ⃗)] log²(θ̃_i(x)/θ_i)`.
pub fn evaluate_multi_mle(
    prior: &MultiPrior,
    state: &ProductState,
    pom: &Pom,
    estimators: &[Estimator],
) -> Result<f64> {
    state.check_against(prior)?;
    let d = prior.params();
    if estimators.len() != d {
        return Err(Error::validation(format!(
            "{} estimators for {d} parameters",
            estimators.len()
        )));
    }
    let values: Vec<Vec<f64>> = estimators
        .iter()
        .map(|e| e.values_for(pom))
        .collect::<Result<_>>()?;
    let lik = state.likelihoods(pom)?;
    let masses = prior.masses();
    let total: f64 = lik
        .par_iter()
        .enumerate()
        .map(|(x, row)| {
            let le: Vec<f64> = values.iter().map(|v| v[x].ln()).collect();
            let mut acc = 0.0;
            for (k, (&l, &m)) in row.iter().zip(&masses).enumerate() {
                if l == 0.0 || m == 0.0 {
                    continue;
                }
                let theta = prior.node(k);
                let dev: f64 = le
                    .iter()
                    .zip(&theta)
                    .map(|(e, t)| (e - t.ln()).powi(2))
                    .sum();
                acc += m * l * dev;
            }
            acc
        })
        .sum();
    Ok(total / d as f64)
}
