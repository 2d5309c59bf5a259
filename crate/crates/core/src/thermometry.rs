//! Equilibrium thermometry: Gibbs-state encodings of temperature and the
//! energy-basis structure of their optimal measurement.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{
    minimum_error, operator_moments, optimal_strategy, MinimumReport, OptimalStrategy,
};
use crate::models::{ensure_same_grid, ParameterizedState, Pom, PriorDensity};
use crate::numerics::{Grid, HermitianOperator};

/// Diagonal probe Hamiltonian and the Boltzmann constant used to convert temperature to energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonianSpec {
    energies: Vec<f64>,
    kb: f64,
}

impl HamiltonianSpec {
    pub fn new(energies: Vec<f64>, kb: f64) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::validation("Hamiltonian needs at least two levels"));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::validation("energies must be finite"));
        }
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::validation(
                "energies must be listed in ascending order",
            ));
        }
        if !(kb.is_finite() && kb > 0.0) {
            return Err(Error::validation("k_B must be positive and finite"));
        }
        Ok(HamiltonianSpec { energies, kb })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn kb(&self) -> f64 {
        self.kb
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Boltzmann populations at temperature `theta`.
    ///
    /// Energies are shifted by the ground energy first, so the exponentials
    /// can underflow but never overflow.
    pub fn populations(&self, theta: f64) -> Vec<f64> {
        let e0 = self.energies[0];
        let beta = 1.0 / (self.kb * theta);
        let w: Vec<f64> = self
            .energies
            .iter()
            .map(|e| (-(e - e0) * beta).exp())
            .collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    /// Hamiltonian with every energy multiplied by `gamma`.
    pub fn scaled(&self, gamma: f64) -> Result<Self> {
        Self::new(self.energies.iter().map(|e| e * gamma).collect(), self.kb)
    }

    /// Projective measurement onto the energy eigenbasis, labels `"E0"`, `"E1"`, ...
    pub fn energy_pom(&self) -> Pom {
        let effects = (0..self.dim())
            .map(|k| {
                let mut d = vec![0.0; self.dim()];
                d[k] = 1.0;
                HermitianOperator::from_real_diagonal(&d)
            })
            .collect();
        Pom::new((0..self.dim()).map(|k| format!("E{k}")).collect(), effects)
            .expect("energy projectors form a POM")
    }
}

/// Thermal state `exp(-H/(k_B θ))/Z` at every grid node.
pub fn thermal_state_family(h: &HamiltonianSpec, grid: &Grid) -> Result<ParameterizedState> {
    let states = grid
        .nodes()
        .iter()
        .map(|&t| HermitianOperator::from_real_diagonal(&h.populations(t)))
        .collect();
    Ok(ParameterizedState::from_parts_unchecked(
        grid.clone(),
        states,
    ))
}

/// `R[ε][k] = ∫ p(θ) e^{-ε/k_Bθ} log^k(θ/θ_u) / Z(θ) dθ` for `k ∈ {0, 1}`.
#[derive(Debug, Clone, Serialize)]
pub struct RTable {
    pub energies: Vec<f64>,
    pub r0: Vec<f64>,
    pub r1: Vec<f64>,
}

impl RTable {
    /// `R[ε][1] / R[ε][0]`, the eigenvalue of S on level ε.
    pub fn ratios(&self) -> Vec<f64> {
        self.r1.iter().zip(&self.r0).map(|(a, b)| a / b).collect()
    }
}

pub fn r_coefficients(h: &HamiltonianSpec, prior: &PriorDensity, theta_u: f64) -> Result<RTable> {
    if !(theta_u.is_finite() && theta_u > 0.0) {
        return Err(Error::validation("theta_u must be positive"));
    }
    let d = h.dim();
    let mut r0 = vec![0.0; d];
    let mut r1 = vec![0.0; d];
    for (&t, m) in prior.grid().nodes().iter().zip(prior.masses()) {
        if m == 0.0 {
            continue;
        }
        let l = (t / theta_u).ln();
        for (k, p) in h.populations(t).into_iter().enumerate() {
            r0[k] += m * p;
            r1[k] += m * p * l;
        }
    }
    Ok(RTable {
        energies: h.energies().to_vec(),
        r0,
        r1,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermometryDiagnostics {
    /// Largest `|S_{εε'}|` with `ε ≠ ε'`.
    pub max_offdiagonal: f64,
    /// `max_offdiagonal / max|S|`.
    pub max_offdiagonal_rel: f64,
    /// `|S_{εε} − R[ε][1]/R[ε][0]|` per level.
    pub level_deviation: Vec<f64>,
    /// `‖[S, H]‖_F`.
    pub commutator_with_h: f64,
}

#[derive(Debug, Clone)]
pub struct ThermometryOptimum {
    pub strategy: OptimalStrategy,
    pub report: MinimumReport,
    pub r_table: RTable,
    pub diagnostics: ThermometryDiagnostics,
}

/// Runs the generic Lyapunov pipeline on the thermal family and checks it
/// against the closed-form energy-basis solution.
pub fn thermometry_optimum(
    h: &HamiltonianSpec,
    prior: &PriorDensity,
    theta_u: f64,
) -> Result<ThermometryOptimum> {
    let state = thermal_state_family(h, prior.grid())?;
    ensure_same_grid(prior.grid(), state.grid())?;
    let moments = operator_moments(prior, &state, theta_u)?;
    let strategy = optimal_strategy(&moments)?;
    let report = minimum_error(&moments)?;
    let r_table = r_coefficients(h, prior, theta_u)?;

    let s = strategy.s.matrix();
    let d = h.dim();
    let mut max_off: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                max_off = max_off.max(s[(i, j)].norm());
            }
        }
    }
    let smax = strategy.s.max_abs();
    let level_deviation = r_table
        .ratios()
        .iter()
        .enumerate()
        .map(|(k, r)| (s[(k, k)].re - r).abs())
        .collect();
    let hop = HermitianOperator::from_real_diagonal(h.energies());
    let comm = (s * hop.matrix() - hop.matrix() * s).norm();
    let diagnostics = ThermometryDiagnostics {
        max_offdiagonal: max_off,
        max_offdiagonal_rel: if smax > 0.0 { max_off / smax } else { 0.0 },
        level_deviation,
        commutator_with_h: comm,
    };
    Ok(ThermometryOptimum {
        strategy,
        report,
        r_table,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::jeffreys_prior;
    use crate::numerics::make_log_grid;

    #[test]
    fn infinite_temperature_limit() {
        let h = HamiltonianSpec::new(vec![0.0, 1.0, 2.5], 1.0).unwrap();
        let p = h.populations(1e6 * 2.5);
        for x in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-5);
        }
    }

    #[test]
    fn degenerate_levels_equal_populations() {
        let h = HamiltonianSpec::new(vec![0.0, 0.0], 1.0).unwrap();
        for t in [0.01, 1.0, 100.0] {
            assert_eq!(h.populations(t), vec![0.5, 0.5]);
        }
    }

    #[test]
    fn qubit_boltzmann_ratio() {
        let h = HamiltonianSpec::new(vec![0.0, 1.0], 1.0).unwrap();
        let p = h.populations(1.0);
        let e = (-1f64).exp();
        assert!((p[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((p[1] - e / (1.0 + e)).abs() < 1e-15);
    }

    #[test]
    fn low_temperature_does_not_overflow() {
        let h = HamiltonianSpec::new(vec![-1e4, 0.0, 1e4], 1.0).unwrap();
        let p = h.populations(1e-3);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_hamiltonian_r_table() {
        let g = make_log_grid(0.1, 10.0, 64).unwrap();
        let prior = jeffreys_prior(&g);
        let h = HamiltonianSpec::new(vec![0.0, 0.0], 1.0).unwrap();
        let r = r_coefficients(&h, &prior, 2.0).unwrap();
        let m1 = prior.log_moment(1, 2.0);
        for k in 0..2 {
            assert!((r.r0[k] - 0.5).abs() < 1e-12);
            assert!((r.r1[k] - 0.5 * m1).abs() < 1e-12);
        }
    }

    #[test]
    fn r0_sums_to_one() {
        let g = make_log_grid(0.05, 20.0, 100).unwrap();
        let prior = jeffreys_prior(&g);
        let h = HamiltonianSpec::new(vec![0.0, 0.3, 1.0, 4.0], 2.0).unwrap();
        let r = r_coefficients(&h, &prior, 1.0).unwrap();
        assert!((r.r0.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert!(r.r0.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(HamiltonianSpec::new(vec![0.0], 1.0).is_err());
        assert!(HamiltonianSpec::new(vec![1.0, 0.0], 1.0).is_err());
        assert!(HamiltonianSpec::new(vec![0.0, 1.0], 0.0).is_err());
        assert!(HamiltonianSpec::new(vec![0.0, f64::NAN], 1.0).is_err());
    }
}
