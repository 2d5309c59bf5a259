//! Random instance generators for tests, benchmarks and property checks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::models::{ParameterizedState, Pom};
use crate::numerics::{eig_hermitian, CMatrix, Grid, HermitianOperator};
use crate::thermometry::HamiltonianSpec;

/// Counter-based generator used throughout the crate.
pub type QseRng = ChaCha20Rng;

pub fn rng(seed: u64) -> QseRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
    HermitianOperator::symmetrized(ginibre(dim, dim, rng))
}

/// Haar-distributed unitary via QR with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            u[(i, k)] *= phase;
        }
    }
    u
}

/// Density matrix of the given rank (`G G† / Tr`, `G` a `dim × rank` Ginibre matrix).
pub fn random_density_matrix<R: Rng + ?Sized>(
    dim: usize,
    rank: usize,
    rng: &mut R,
) -> HermitianOperator {
    let g = ginibre(dim, rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
    HermitianOperator::symmetrized(m / Complex64::new(tr, 0.0))
}

/// A random POM with `outcomes` effects, built as `T^{-1/2} A_x T^{-1/2}` with
/// `A_x` random positive operators and `T = Σ A_x`.
pub fn random_pom<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> Pom {
    let mut ranks: Vec<usize> = (0..outcomes).map(|_| rng.random_range(1..=dim)).collect();
    // The total must be invertible.
    if ranks.iter().sum::<usize>() < dim {
        ranks[outcomes - 1] = dim;
    }
    let raw: Vec<HermitianOperator> = ranks
        .iter()
        .map(|&rank| {
            let g = ginibre(dim, rank, rng);
            HermitianOperator::symmetrized(&g * g.adjoint())
        })
        .collect();
    let total = raw
        .iter()
        .fold(HermitianOperator::zeros(dim), |acc, a| acc.add(a));
    let es = eig_hermitian(&total).expect("sum of positive operators is Hermitian");
    let n = dim;
    let inv_sqrt = &es.vectors
        * CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(1.0 / es.values[i].sqrt(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        * es.vectors.adjoint();
    let effects: Vec<HermitianOperator> = raw.iter().map(|a| a.conjugate_by(&inv_sqrt)).collect();
    let labels = (0..outcomes).map(|k| format!("x{k}")).collect();
    Pom::new(labels, effects).expect("normalized random POM is valid")
}

/// Projective POM onto the columns of a unitary.
pub fn basis_pom(u: &CMatrix) -> Pom {
    let n = u.nrows();
    let effects = (0..n)
        .map(|k| {
            let v: Vec<Complex64> = u.column(k).iter().copied().collect();
            HermitianOperator::projector(&v).expect("unitary columns are nonzero")
        })
        .collect();
    Pom::new((0..n).map(|k| format!("b{k}")).collect(), effects)
        .expect("orthonormal basis is a POM")
}

/// Thermal populations of `energies` (with `k_B = 1`) rotated by
/// `exp(i log θ G)`, `G` a random Hermitian generator of the given strength.
/// States at different θ do not commute.
pub fn rotating_thermal_family<R: Rng + ?Sized>(
    grid: &Grid,
    energies: &[f64],
    strength: f64,
    rng: &mut R,
) -> ParameterizedState {
    let d = energies.len();
    let gen = random_hermitian(d, rng).scaled(strength);
    let es = eig_hermitian(&gen).expect("generator is Hermitian");
    let h = HamiltonianSpec::new(energies.to_vec(), 1.0).expect("valid energies");
    let states = grid
        .nodes()
        .iter()
        .map(|&t| {
            let phase = CMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    Complex64::from_polar(1.0, es.values[i] * t.ln())
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let u = &es.vectors * phase * es.vectors.adjoint();
            HermitianOperator::from_real_diagonal(&h.populations(t)).conjugate_by(&u)
        })
        .collect();
    ParameterizedState::new(grid.clone(), states).expect("unitary rotation preserves states")
}
