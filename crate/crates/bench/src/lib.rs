//! Fixtures shared by the benchmarks in `benches/`.

use qse_core::random::{random_density_matrix, random_hermitian, rng};
use qse_core::thermometry::{thermal_state_family, HamiltonianSpec};
use qse_core::{
    flat_in_log_prior, make_log_grid, HermitianOperator, ParameterizedState, PriorDensity,
};

/// Full-rank `ρ0` and a Hermitian right-hand side of the given dimension.
pub fn lyapunov_pair(dim: usize, seed: u64) -> (HermitianOperator, HermitianOperator) {
    let mut r = rng(seed);
    (
        random_density_matrix(dim, dim, &mut r),
        random_hermitian(dim, &mut r),
    )
}

/// Thermal ladder with `levels` unit-spaced energies and a log-flat prior on [0.1, 10].
pub fn thermal_ladder(
    levels: usize,
    nodes: usize,
) -> (PriorDensity, ParameterizedState, HamiltonianSpec) {
    let g = make_log_grid(0.1, 10.0, nodes).expect("valid grid");
    let h =
        HamiltonianSpec::new((0..levels).map(|k| k as f64).collect(), 1.0).expect("valid energies");
    let state = thermal_state_family(&h, &g).expect("thermal family");
    (flat_in_log_prior(&g), state, h)
}
