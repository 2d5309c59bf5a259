use proptest::prelude::*;

use qse_core::assessment::{
    info_gain_j, info_gain_k, info_gain_k_operator_form, prior_uncertainty,
};
use qse_core::numerics::solve_lyapunov;
use qse_core::random::{
    random_density_matrix, random_hermitian, random_pom, random_unitary, rng,
    rotating_thermal_family,
};
use qse_core::thermometry::{thermometry_optimum, HamiltonianSpec};
use qse_core::{
    bayes_estimator, evaluate_mle, jeffreys_prior, log_normal_prior, make_log_grid, minimum_error,
    operator_moments, optimal_strategy, posterior, ParameterizedState, Pom, PriorDensity,
};

fn instance(seed: u64, dim: usize) -> (PriorDensity, ParameterizedState) {
    let mut r = rng(seed);
    let g = make_log_grid(0.2, 5.0, 120).unwrap();
    let energies: Vec<f64> = (0..dim).map(|k| k as f64 * 0.8).collect();
    let state = rotating_thermal_family(&g, &energies, 0.5, &mut r);
    (jeffreys_prior(&g), state)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lyapunov_is_linear(seed in any::<u64>(), dim in 2usize..7, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let rho0 = random_density_matrix(dim, dim, &mut r);
        let x = random_hermitian(dim, &mut r);
        let y = random_hermitian(dim, &mut r);
        let sx = solve_lyapunov(&rho0, &x).unwrap();
        let sy = solve_lyapunov(&rho0, &y).unwrap();
        let sxy = solve_lyapunov(&rho0, &x.scaled(a).add_scaled(b, &y)).unwrap();
        let diff = sxy.sub(&sx.scaled(a).add_scaled(b, &sy));
        let scale = 1.0 + sxy.max_abs();
        prop_assert!(diff.max_abs() <= 1e-9 * scale);
    }

    #[test]
    fn lyapunov_is_unitarily_covariant(seed in any::<u64>(), dim in 2usize..7) {
        let mut r = rng(seed);
        let rho0 = random_density_matrix(dim, dim, &mut r);
        let rho1 = random_hermitian(dim, &mut r);
        let u = random_unitary(dim, &mut r);
        let s = solve_lyapunov(&rho0, &rho1).unwrap();
        let su = solve_lyapunov(&rho0.conjugate_by(&u), &rho1.conjugate_by(&u)).unwrap();
        let diff = su.sub(&s.conjugate_by(&u));
        prop_assert!(diff.max_abs() <= 1e-9 * (1.0 + s.max_abs()));
    }

    #[test]
    fn posterior_order_independent(seed in any::<u64>(), picks in proptest::collection::vec(0usize..3, 2..6)) {
        let (prior, state) = instance(seed % 1000, 2);
        let mut r = rng(seed);
        let pom = random_pom(2, 3, &mut r);
        let labels: Vec<String> = picks.iter().map(|&k| pom.labels()[k].clone()).collect();
        let mut fwd = prior.clone();
        for l in &labels {
            fwd = posterior(&fwd, &state, &pom, l).unwrap();
        }
        let mut rev = prior.clone();
        for l in labels.iter().rev() {
            rev = posterior(&rev, &state, &pom, l).unwrap();
        }
        let mass: f64 = fwd.masses().iter().sum();
        prop_assert!((mass - 1.0).abs() < 1e-10);
        for (a, b) in fwd.values().iter().zip(rev.values()) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn mle_matches_operator_form(seed in any::<u64>(), dim in 2usize..4, outcomes in 2usize..5) {
        let (prior, state) = instance(seed % 1000, dim);
        let mut r = rng(seed);
        let pom = random_pom(dim, outcomes, &mut r);
        let est = bayes_estimator(&prior, &state, &pom).unwrap();
        let direct = evaluate_mle(&prior, &state, &pom, &est).unwrap();
        let m = operator_moments(&prior, &state, 1.7).unwrap();
        let via_w: f64 = pom
            .effects()
            .iter()
            .zip(est.values_for(&pom).unwrap())
            .map(|(e, t)| e.trace_product(&m.w_operator(t)))
            .sum();
        prop_assert!((direct - via_w).abs() < 1e-10);
    }
}

#[test]
fn theta_u_invariance() {
    for seed in 0..5 {
        let (prior, state) = instance(seed, 3);
        let m1 = operator_moments(&prior, &state, 0.7).unwrap();
        let m2 = operator_moments(&prior, &state, 7.0).unwrap();
        let (e1, e2) = (
            minimum_error(&m1).unwrap().epsilon_min,
            minimum_error(&m2).unwrap().epsilon_min,
        );
        assert!((e1 - e2).abs() <= 1e-8 * e1, "{e1} {e2}");
        let (s1, s2) = (
            optimal_strategy(&m1).unwrap(),
            optimal_strategy(&m2).unwrap(),
        );
        for ((a, b), (x, y)) in s1
            .eigenvalues
            .iter()
            .zip(&s2.eigenvalues)
            .zip(s1.estimates.iter().zip(&s2.estimates))
        {
            assert!((a - b - 10f64.ln()).abs() < 1e-10);
            assert!((x - y).abs() <= 1e-10 * x);
        }
    }
}

#[test]
fn scale_equivariance() {
    let gamma = 3.0;
    for seed in 0..5 {
        let (prior, state) = instance(seed, 3);
        let m = operator_moments(&prior, &state, 1.3).unwrap();
        let mg = operator_moments(
            &prior.rescaled(gamma).unwrap(),
            &state.rescaled(gamma).unwrap(),
            1.3 * gamma,
        )
        .unwrap();
        let (s, sg) = (
            optimal_strategy(&m).unwrap(),
            optimal_strategy(&mg).unwrap(),
        );
        assert!(sg.s.sub(&s.s).max_abs() < 1e-10);
        let (e, eg) = (
            minimum_error(&m).unwrap().epsilon_min,
            minimum_error(&mg).unwrap().epsilon_min,
        );
        assert!((e - eg).abs() <= 1e-9 * e);
        for (a, b) in s.estimates.iter().zip(&sg.estimates) {
            assert!((b - gamma * a).abs() <= 1e-9 * b);
        }
    }
}

#[test]
fn temperature_energy_rescaling() {
    let g = make_log_grid(0.1, 10.0, 200).unwrap();
    let prior = log_normal_prior(&g, 0.2, 0.8).unwrap();
    let h = HamiltonianSpec::new(vec![0.0, 0.4, 1.3], 1.0).unwrap();
    let base = thermometry_optimum(&h, &prior, 1.0).unwrap();
    let gamma = 2.5;
    let scaled = thermometry_optimum(
        &h.scaled(gamma).unwrap(),
        &prior.rescaled(gamma).unwrap(),
        gamma,
    )
    .unwrap();
    assert!(
        (base.report.epsilon_min - scaled.report.epsilon_min).abs()
            <= 1e-9 * base.report.epsilon_min
    );
    for (a, b) in base
        .strategy
        .estimates
        .iter()
        .zip(&scaled.strategy.estimates)
    {
        assert!((b - gamma * a).abs() <= 1e-9 * b);
    }
}

#[test]
fn bound_holds_for_random_measurements() {
    let mut r = rng(2024);
    for k in 0..100 {
        let dim = 2 + k % 3;
        let (prior, state) = instance(k as u64, dim);
        let pom = random_pom(dim, 2 + k % 4, &mut r);
        let est = bayes_estimator(&prior, &state, &pom).unwrap();
        let mle = evaluate_mle(&prior, &state, &pom, &est).unwrap();
        let eps_p = prior_uncertainty(&prior);
        let kk = info_gain_k(&prior, &state, &pom).unwrap();
        let m = operator_moments(&prior, &state, 1.0).unwrap();
        let j = info_gain_j(&m).unwrap();
        assert!((mle - (eps_p - kk)).abs() < 1e-9, "{mle} vs {}", eps_p - kk);
        assert!(kk <= j + 1e-9);
        assert!((kk - info_gain_k_operator_form(&m, &pom).unwrap()).abs() < 1e-10);
        assert!(mle >= minimum_error(&m).unwrap().epsilon_min - 1e-9);
    }
}

#[test]
fn optimal_pom_gains_j() {
    for seed in 0..5 {
        let (prior, state) = instance(seed, 3);
        let m = operator_moments(&prior, &state, 1.0).unwrap();
        let pom: Pom = optimal_strategy(&m).unwrap().pom();
        let j = info_gain_j(&m).unwrap();
        assert!((info_gain_k(&prior, &state, &pom).unwrap() - j).abs() < 1e-10);
        assert!((info_gain_k_operator_form(&m, &pom).unwrap() - j).abs() < 1e-10);
    }
}
