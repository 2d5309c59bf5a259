//! Optimal single-shot scale estimation.
//!
//! For a prior `p(θ)` and an encoding `ρ(θ)`, the mean logarithmic error
//! `E[log²(θ̃/θ)]` of any measurement-and-estimator pair is bounded below by
//! `∫ p log²(θ/θ_u) − Tr(ρ0 S²)`, where `S` solves `S ρ0 + ρ0 S = 2 ρ1` and
//! `ρ_k = ∫ p(θ) ρ(θ) log^k(θ/θ_u) dθ`. The bound is attained by measuring
//! in the eigenbasis of `S` and reporting `θ_u e^s` for eigenvalue `s`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{ensure_same_grid, Estimator, ParameterizedState, Pom, PriorDensity};
use crate::numerics::{
    eig_hermitian, min_eigenvalue, solve_lyapunov_with, CMatrix, HermitianOperator,
};
use crate::tolerance::Tolerances;

/// Log-weighted averages of the encoded state, `ρ_k` for `k = 0, 1, 2`.
#[derive(Debug, Clone)]
pub struct OperatorMoments {
    pub rho0: HermitianOperator,
    pub rho1: HermitianOperator,
    pub rho2: HermitianOperator,
    pub theta_u: f64,
    /// Scalar prior moments `∫ p log^k(θ/θ_u)` for `k = 0, 1, 2`.
    pub prior_log_moments: [f64; 3],
}

impl OperatorMoments {
    pub fn dim(&self) -> usize {
        self.rho0.dim()
    }

    /// `∫ p(θ) log²(θ/θ_u) dθ`.
    pub fn prior_term(&self) -> f64 {
        self.prior_log_moments[2]
    }

    /// Moments for a different reference scale. With `c = log(θ_u'/θ_u)`:
    /// `ρ1' = ρ1 − c ρ0` and `ρ2' = ρ2 − 2c ρ1 + c² ρ0`.
    pub fn recentered(&self, theta_u: f64) -> Result<Self> {
        check_theta_u(theta_u)?;
        let c = (theta_u / self.theta_u).ln();
        let [m0, m1, m2] = self.prior_log_moments;
        Ok(OperatorMoments {
            rho0: self.rho0.clone(),
            rho1: self.rho1.add_scaled(-c, &self.rho0),
            rho2: self
                .rho2
                .add_scaled(-2.0 * c, &self.rho1)
                .add_scaled(c * c, &self.rho0),
            theta_u,
            prior_log_moments: [m0, m1 - c * m0, m2 - 2.0 * c * m1 + c * c * m0],
        })
    }

    /// `W[θ̃] = ρ2 + ρ0 log²(θ̃/θ_u) − 2 ρ1 log(θ̃/θ_u)`; its trace against an
    /// effect is that outcome's contribution to the mean logarithmic error.
    pub fn w_operator(&self, estimate: f64) -> HermitianOperator {
        let w = (estimate / self.theta_u).ln();
        self.rho2
            .add_scaled(w * w, &self.rho0)
            .add_scaled(-2.0 * w, &self.rho1)
    }
}

fn check_theta_u(theta_u: f64) -> Result<()> {
    if theta_u.is_finite() && theta_u > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "theta_u must be positive and finite, got {theta_u}"
        )))
    }
}

/// `ρ_k = Σ_j w_j p(θ_j) ρ(θ_j) log^k(θ_j/θ_u)`.
pub fn operator_moments(
    prior: &PriorDensity,
    state: &ParameterizedState,
    theta_u: f64,
) -> Result<OperatorMoments> {
    check_theta_u(theta_u)?;
    ensure_same_grid(prior.grid(), state.grid())?;
    let d = state.dim();
    let mut acc = [
        CMatrix::zeros(d, d),
        CMatrix::zeros(d, d),
        CMatrix::zeros(d, d),
    ];
    let mut scalars = [0.0; 3];
    for ((&t, m), rho) in prior
        .grid()
        .nodes()
        .iter()
        .zip(prior.masses())
        .zip(state.states())
    {
        if m == 0.0 {
            continue;
        }
        let l = (t / theta_u).ln();
        let coeffs = [m, m * l, m * l * l];
        for k in 0..3 {
            acc[k].zip_apply(rho.matrix(), |s, v| *s += v * coeffs[k]);
            scalars[k] += coeffs[k];
        }
    }
    let [a0, a1, a2] = acc;
    Ok(OperatorMoments {
        rho0: HermitianOperator::symmetrized(a0),
        rho1: HermitianOperator::symmetrized(a1),
        rho2: HermitianOperator::symmetrized(a2),
        theta_u,
        prior_log_moments: scalars,
    })
}

/// Projective measurement and estimator attaining the minimum error.
#[derive(Debug, Clone)]
pub struct OptimalStrategy {
    /// Solution of `S ρ0 + ρ0 S = 2 ρ1`.
    pub s: HermitianOperator,
    /// Distinct eigenvalues of S, ascending.
    pub eigenvalues: Vec<f64>,
    /// Spectral projector of each distinct eigenvalue.
    pub projectors: Vec<HermitianOperator>,
    /// `θ_u e^{s_j}`.
    pub estimates: Vec<f64>,
    pub theta_u: f64,
    /// Outcome labels: each eigenvalue printed to 12 significant digits.
    pub labels: Vec<String>,
}

impl OptimalStrategy {
    pub fn pom(&self) -> Pom {
        Pom::new(self.labels.clone(), self.projectors.clone())
            .expect("spectral projectors form a POM")
    }

    pub fn estimator(&self) -> Estimator {
        Estimator::for_pom(&self.pom(), &self.estimates).expect("exponentials are positive")
    }
}

fn eigen_label(s: f64) -> String {
    format!("{:.11e}", s + 0.0)
}

pub fn optimal_strategy(m: &OperatorMoments) -> Result<OptimalStrategy> {
    optimal_strategy_with(m, &Tolerances::default())
}

pub fn optimal_strategy_with(m: &OperatorMoments, tol: &Tolerances) -> Result<OptimalStrategy> {
    let s = solve_lyapunov_with(&m.rho0, &m.rho1, tol)?;
    let es = eig_hermitian(&s)?;
    let n = es.values.len();
    let span = es.values[n - 1] - es.values[0];
    let merge_tol = tol.degeneracy_rel * (span + 1.0);

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..n {
        match groups.last_mut() {
            Some(g) if es.values[k] - es.values[g[0]] < merge_tol => g.push(k),
            _ => groups.push(vec![k]),
        }
    }

    let mut eigenvalues = Vec::with_capacity(groups.len());
    let mut projectors = Vec::with_capacity(groups.len());
    let mut labels: Vec<String> = Vec::with_capacity(groups.len());
    for g in &groups {
        let value = g.iter().map(|&k| es.values[k]).sum::<f64>() / g.len() as f64;
        let mut p = CMatrix::zeros(n, n);
        for &k in g {
            let v = es.vectors.column(k);
            p += v * v.adjoint();
        }
        let mut label = eigen_label(value);
        if labels.contains(&label) {
            label = format!("{label}#{}", labels.len());
        }
        eigenvalues.push(value);
        projectors.push(HermitianOperator::symmetrized(p));
        labels.push(label);
    }
    let estimates = eigenvalues.iter().map(|s| m.theta_u * s.exp()).collect();
    Ok(OptimalStrategy {
        s,
        eigenvalues,
        projectors,
        estimates,
        theta_u: m.theta_u,
        labels,
    })
}

/// The minimum mean logarithmic error and its two constituent terms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinimumReport {
    pub epsilon_min: f64,
    /// `∫ p(θ) log²(θ/θ_u) dθ`.
    pub prior_term: f64,
    /// `Tr(ρ0 S²)`.
    pub trace_term: f64,
    /// `Tr(ρ1 S)`; equals `trace_term` whenever S solves the Lyapunov equation.
    pub trace_rho1_s: f64,
    pub theta_u: f64,
}

pub fn minimum_error(m: &OperatorMoments) -> Result<MinimumReport> {
    let s = solve_lyapunov_with(&m.rho0, &m.rho1, &Tolerances::default())?;
    Ok(minimum_from_s(m, &s))
}

pub(crate) fn minimum_from_s(m: &OperatorMoments, s: &HermitianOperator) -> MinimumReport {
    let s2 = s.matrix() * s.matrix();
    let trace_term = crate::numerics::trace_product(m.rho0.matrix(), &s2);
    let prior_term = m.prior_term();
    MinimumReport {
        epsilon_min: prior_term - trace_term,
        prior_term,
        trace_term,
        trace_rho1_s: m.rho1.trace_product(s),
        theta_u: m.theta_u,
    }
}

/// Born-rule likelihoods plus estimates aligned with the POM's outcomes.
fn aligned(
    prior: &PriorDensity,
    state: &ParameterizedState,
    pom: &Pom,
    est: &Estimator,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    ensure_same_grid(prior.grid(), state.grid())?;
    let lik = pom.likelihoods(state)?;
    let values = est.values_for(pom)?;
    Ok((lik, values))
}

/// Mean logarithmic error `Σ_x Σ_j w_j p(θ_j) Tr[M(x) ρ(θ_j)] log²(θ̃(x)/θ_j)`.
pub fn evaluate_mle(
    prior: &PriorDensity,
    state: &ParameterizedState,
    pom: &Pom,
    est: &Estimator,
) -> Result<f64> {
    let (lik, values) = aligned(prior, state, pom, est)?;
    let masses = prior.masses();
    let nodes = prior.grid().nodes();
    let mut total = 0.0;
    for (row, &e) in lik.iter().zip(&values) {
        let le = e.ln();
        for ((&l, &m), &t) in row.iter().zip(&masses).zip(nodes) {
            let dev = le - t.ln();
            total += m * l * dev * dev;
        }
    }
    Ok(total)
}

/// Estimator that reports, for each outcome, the posterior geometric mean
/// `θ_u exp(∫ p(θ|x) log(θ/θ_u) dθ)`. Outcomes with negligible probability
/// fall back to the prior geometric mean.
pub fn bayes_estimator(
    prior: &PriorDensity,
    state: &ParameterizedState,
    pom: &Pom,
) -> Result<Estimator> {
    ensure_same_grid(prior.grid(), state.grid())?;
    let tol = Tolerances::default();
    let lik = pom.likelihoods(state)?;
    let masses = prior.masses();
    let nodes = prior.grid().nodes();
    let center = prior.log_moment(1, 1.0);
    let mut out = BTreeMap::new();
    for (label, row) in pom.labels().iter().zip(&lik) {
        let (mut px, mut acc) = (0.0, 0.0);
        for ((&l, &m), &t) in row.iter().zip(&masses).zip(nodes) {
            px += m * l;
            acc += m * l * (t.ln() - center);
        }
        let log_est = if px > tol.negligible_probability {
            center + acc / px
        } else {
            center
        };
        out.insert(label.clone(), log_est.exp());
    }
    Estimator::new(out)
}

/// Smallest eigenvalue of `A2 − A1²` with `A_k = Σ_x M(x) ω(x)^k`,
/// `ω(x) = log θ̃(x)`. Zero for projective measurements; the value does not
/// depend on the reference scale because the effects sum to the identity.
pub fn jensen_gap(pom: &Pom, est: &Estimator) -> Result<f64> {
    let values = est.values_for(pom)?;
    let d = pom.dim();
    let mut a1 = HermitianOperator::zeros(d);
    let mut a2 = HermitianOperator::zeros(d);
    for (m, e) in pom.effects().iter().zip(&values) {
        let w = e.ln();
        a1 = a1.add_scaled(w, m);
        a2 = a2.add_scaled(w * w, m);
    }
    let a1sq = HermitianOperator::symmetrized(a1.matrix() * a1.matrix());
    Ok(min_eigenvalue(&a2.sub(&a1sq)))
}

/// Optimality certificate: `Υ = ρ2 − S ρ0 S`.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    #[serde(skip)]
    pub upsilon: HermitianOperator,
    /// `Tr Υ`, which must equal the minimum error.
    pub trace_upsilon: f64,
    /// Smallest eigenvalue of `W[θ̃_j] − Υ` for each optimal estimate.
    pub min_eigs: Vec<f64>,
}

impl Certificate {
    /// Smallest eigenvalue of `W[θ̃] − Υ` at an arbitrary estimate.
    pub fn margin_at(&self, m: &OperatorMoments, estimate: f64) -> f64 {
        min_eigenvalue(&m.w_operator(estimate).sub(&self.upsilon))
    }
}

pub fn hh_certificate(m: &OperatorMoments, strat: &OptimalStrategy) -> Certificate {
    let upsilon = m.rho2.sub(&m.rho0.sandwich(&strat.s));
    let min_eigs = strat
        .estimates
        .iter()
        .map(|&e| min_eigenvalue(&m.w_operator(e).sub(&upsilon)))
        .collect();
    Certificate {
        trace_upsilon: upsilon.trace(),
        upsilon,
        min_eigs,
    }
}

/// Operator-valued estimator `Θ̂ = Σ_j θ_u e^{s_j} P_j`.
pub fn scale_observable(strat: &OptimalStrategy) -> HermitianOperator {
    let d = strat.s.dim();
    strat
        .projectors
        .iter()
        .zip(&strat.estimates)
        .fold(HermitianOperator::zeros(d), |acc, (p, &e)| {
            acc.add_scaled(e, p)
        })
}

/// `f(A1) = Tr(ρ0 A1² − 2 ρ1 A1)`, minimized at `A1 = S`.
pub fn variational_objective(m: &OperatorMoments, a1: &HermitianOperator) -> Result<f64> {
    if a1.dim() != m.dim() {
        return Err(Error::validation(
            "variational_objective: dimension mismatch",
        ));
    }
    let a1sq = a1.matrix() * a1.matrix();
    Ok(crate::numerics::trace_product(m.rho0.matrix(), &a1sq) - 2.0 * m.rho1.trace_product(a1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{jeffreys_prior, log_normal_prior};
    use crate::numerics::make_log_grid;
    use crate::random::{random_density_matrix, random_hermitian, rng};
    use crate::thermometry::{thermal_state_family, HamiltonianSpec};

    fn qubit_instance() -> (PriorDensity, ParameterizedState) {
        let g = make_log_grid(0.1, 10.0, 200).unwrap();
        let h = HamiltonianSpec::new(vec![0.0, 1.0], 1.0).unwrap();
        (jeffreys_prior(&g), thermal_state_family(&h, &g).unwrap())
    }

    #[test]
    fn constant_state_moments_factorize() {
        let g = make_log_grid(0.2, 5.0, 40).unwrap();
        let prior = log_normal_prior(&g, 0.1, 0.5).unwrap();
        let rho = random_density_matrix(3, 3, &mut rng(1));
        let state = ParameterizedState::constant(&g, rho.clone()).unwrap();
        let m = operator_moments(&prior, &state, 1.3).unwrap();
        for (k, op) in [&m.rho0, &m.rho1, &m.rho2].into_iter().enumerate() {
            let mk = prior.log_moment(k as i32, 1.3);
            assert!((op.matrix() - rho.scaled(mk).matrix()).norm() < 1e-13);
        }
    }

    #[test]
    fn constant_state_measures_nothing() {
        let g = make_log_grid(0.2, 5.0, 40).unwrap();
        let prior = jeffreys_prior(&g);
        let rho = random_density_matrix(3, 3, &mut rng(2));
        let state = ParameterizedState::constant(&g, rho).unwrap();
        let m = operator_moments(&prior, &state, 0.7).unwrap();
        let strat = optimal_strategy(&m).unwrap();
        let m1 = prior.log_moment(1, 0.7);
        assert_eq!(strat.eigenvalues.len(), 1);
        assert!((strat.eigenvalues[0] - m1).abs() < 1e-10);
        assert!((strat.estimates[0] - 0.7 * m1.exp()).abs() < 1e-10);
        let rep = minimum_error(&m).unwrap();
        let var = prior.log_moment(2, 0.7) - m1 * m1;
        assert!((rep.epsilon_min - var).abs() < 1e-10);
    }

    #[test]
    fn delta_prior_has_zero_error() {
        let g = make_log_grid(0.2, 5.0, 40).unwrap();
        let prior = PriorDensity::delta(g.clone(), 17).unwrap();
        let h = HamiltonianSpec::new(vec![0.0, 1.0, 3.0], 1.0).unwrap();
        let state = thermal_state_family(&h, &g).unwrap();
        let m = operator_moments(&prior, &state, 1.0).unwrap();
        let t0 = g.nodes()[17];
        for (k, op) in [&m.rho0, &m.rho1, &m.rho2].into_iter().enumerate() {
            let expect = state.states()[17].scaled(t0.ln().powi(k as i32));
            assert!((op.matrix() - expect.matrix()).norm() < 1e-13);
        }
        assert!(minimum_error(&m).unwrap().epsilon_min.abs() < 1e-10);
    }

    #[test]
    fn saturation_on_thermal_qubit() {
        let (prior, state) = qubit_instance();
        let m = operator_moments(&prior, &state, 1.0).unwrap();
        let strat = optimal_strategy(&m).unwrap();
        let rep = minimum_error(&m).unwrap();
        let direct = evaluate_mle(&prior, &state, &strat.pom(), &strat.estimator()).unwrap();
        assert!(((direct - rep.epsilon_min) / rep.epsilon_min).abs() < 1e-8);
        assert!((rep.trace_term - rep.trace_rho1_s).abs() < 1e-12);
    }

    #[test]
    fn prior_only_strategy() {
        let (prior, state) = qubit_instance();
        let pom = Pom::trivial(2);
        let tp = (prior.log_moment(1, 1.0)).exp();
        let est = Estimator::for_pom(&pom, &[tp]).unwrap();
        let e = evaluate_mle(&prior, &state, &pom, &est).unwrap();
        let m1 = prior.log_moment(1, 1.0);
        let eps_p = prior.log_moment(2, 1.0) - m1 * m1;
        assert!((e - eps_p).abs() < 1e-10);
    }

    #[test]
    fn nonpositive_estimate_rejected() {
        let mut map = BTreeMap::new();
        map.insert("1".to_string(), 0.0);
        assert!(Estimator::new(map).is_err());
    }

    #[test]
    fn jensen_gap_cases() {
        let pom = Pom::computational_basis(3);
        let est = Estimator::for_pom(&pom, &[0.5, 2.0, 7.0]).unwrap();
        assert!(jensen_gap(&pom, &est).unwrap().abs() < 1e-10);

        let pom = Pom::trivial(2);
        let est = Estimator::for_pom(&pom, &[3.0]).unwrap();
        assert!(jensen_gap(&pom, &est).unwrap().abs() < 1e-12);

        // {I/2, I/2} with estimates e^a, e^b: A2 − A1² = ((a − b)/2)² I.
        let half = HermitianOperator::identity(2).scaled(0.5);
        let pom = Pom::new(vec!["a".into(), "b".into()], vec![half.clone(), half]).unwrap();
        let est = Estimator::for_pom(&pom, &[1f64.exp(), 3f64.exp()]).unwrap();
        let gap = jensen_gap(&pom, &est).unwrap();
        assert!((gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn certificate_on_constant_state() {
        let g = make_log_grid(0.2, 5.0, 40).unwrap();
        let prior = jeffreys_prior(&g);
        let rho = random_density_matrix(2, 2, &mut rng(4));
        let state = ParameterizedState::constant(&g, rho.clone()).unwrap();
        let m = operator_moments(&prior, &state, 1.0).unwrap();
        let strat = optimal_strategy(&m).unwrap();
        let cert = hh_certificate(&m, &strat);
        let tp = strat.estimates[0];
        for e in [0.3, 1.0, 4.0] {
            let lhs = m.w_operator(e).sub(&cert.upsilon);
            let expect = rho.scaled((e / tp).ln().powi(2));
            assert!((lhs.matrix() - expect.matrix()).norm() < 1e-12);
        }
        assert!(cert.min_eigs[0].abs() < 1e-12);
    }

    #[test]
    fn scale_observable_cases() {
        let (prior, state) = qubit_instance();
        let m = operator_moments(&prior, &state, 2.0).unwrap();
        let strat = optimal_strategy(&m).unwrap();
        let theta_hat = scale_observable(&strat);
        let es = eig_hermitian(&theta_hat).unwrap();
        for (v, s) in es.values.iter().zip(&strat.eigenvalues) {
            assert!(((v / 2.0).ln() - s).abs() < 1e-12);
        }
        // Diagonal S.
        let expect = HermitianOperator::from_real_diagonal(&[
            2.0 * strat.eigenvalues[0].exp(),
            2.0 * strat.eigenvalues[1].exp(),
        ]);
        assert!((theta_hat.matrix() - expect.matrix()).norm() < 1e-12);
    }

    #[test]
    fn variational_minimum_value() {
        let (prior, state) = qubit_instance();
        let m = operator_moments(&prior, &state, 1.0).unwrap();
        let strat = optimal_strategy(&m).unwrap();
        let rep = minimum_error(&m).unwrap();
        let f_s = variational_objective(&m, &strat.s).unwrap();
        assert!((f_s + rep.trace_term).abs() < 1e-12);
        assert_eq!(
            variational_objective(&m, &HermitianOperator::zeros(2)).unwrap(),
            0.0
        );
        let mut r = rng(5);
        for _ in 0..20 {
            let gamma = random_hermitian(2, &mut r);
            for eps in [1e-3, -1e-3, 1e-2, -1e-2] {
                let f = variational_objective(&m, &strat.s.add_scaled(eps, &gamma)).unwrap();
                let expect = eps * eps * m.rho0.trace_product(&gamma.jordan(&gamma));
                assert!((f - f_s - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_eigenvalues_merge() {
        let g = make_log_grid(0.1, 10.0, 50).unwrap();
        let prior = jeffreys_prior(&g);
        let h = HamiltonianSpec::new(vec![0.0, 1.0, 1.0], 1.0).unwrap();
        let state = thermal_state_family(&h, &g).unwrap();
        let m = operator_moments(&prior, &state, 1.0).unwrap();
        let strat = optimal_strategy(&m).unwrap();
        assert_eq!(strat.eigenvalues.len(), 2);
        assert!((strat.projectors[1].trace() - 2.0).abs() < 1e-12);
        strat.pom();
    }

    #[test]
    fn labels_render_eigenvalues() {
        assert_eq!(eigen_label(-0.0), "0.00000000000e0");
        assert_eq!(eigen_label(0.123456789012345), "1.23456789012e-1");
    }

    #[test]
    fn grid_mismatch_rejected() {
        let (prior, _) = qubit_instance();
        let g2 = make_log_grid(0.1, 10.0, 100).unwrap();
        let h = HamiltonianSpec::new(vec![0.0, 1.0], 1.0).unwrap();
        let state = thermal_state_family(&h, &g2).unwrap();
        assert!(matches!(
            operator_moments(&prior, &state, 1.0),
            Err(Error::Validation(_))
        ));
        assert!(operator_moments(
            &prior,
            &thermal_state_family(&h, prior.grid()).unwrap(),
            0.0
        )
        .is_err());
    }
}
