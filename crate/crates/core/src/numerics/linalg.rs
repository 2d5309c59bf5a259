use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

pub type CMatrix = DMatrix<Complex64>;

/// Dense complex Hermitian matrix.
///
/// Construction through [`HermitianOperator::new`] checks Hermiticity against
/// the default tolerance and stores the symmetrized matrix `(A + A†)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::new_with(m, Tolerances::default().hermitian_rel)
    }

    pub fn new_with(m: CMatrix, rel_tol: f64) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::validation(format!(
                "operator must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation("operator has non-finite entries"));
        }
        let scale = max_abs(&m);
        let asym = max_abs(&(&m - m.adjoint()));
        if asym > rel_tol * scale {
            return Err(Error::validation(format!(
                "operator is not Hermitian: max|A - A†| = {asym:e}, max|A| = {scale:e}"
            )));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without a tolerance check; for results of exact-in-theory Hermitian algebra.
    pub(crate) fn symmetrized(m: CMatrix) -> Self {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        HermitianOperator(h)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        HermitianOperator(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn from_real(rows: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * rows {
            return Err(Error::validation("real matrix data has wrong length"));
        }
        Self::new(CMatrix::from_fn(rows, rows, |i, j| {
            Complex64::new(data[i * rows + j], 0.0)
        }))
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOperator(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator(CMatrix::zeros(dim, dim))
    }

    /// Rank-one projector `|v⟩⟨v|` onto the normalized vector `v`.
    pub fn projector(v: &[Complex64]) -> Result<Self> {
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::validation("cannot project onto a zero vector"));
        }
        let n = v.len();
        Ok(Self::symmetrized(CMatrix::from_fn(n, n, |i, j| {
            v[i] * v[j].conj() / (norm * norm)
        })))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Real part of the trace.
    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// `Re Tr(self · other)`, computed without forming the product.
    pub fn trace_product(&self, other: &HermitianOperator) -> f64 {
        trace_product(&self.0, &other.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        HermitianOperator(&self.0 * Complex64::new(a, 0.0))
    }

    pub fn add(&self, other: &HermitianOperator) -> Self {
        HermitianOperator(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HermitianOperator) -> Self {
        HermitianOperator(&self.0 - &other.0)
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &HermitianOperator) -> Self {
        HermitianOperator(&self.0 + &other.0 * Complex64::new(a, 0.0))
    }

    /// `X self X†` for an arbitrary square `X`.
    pub fn conjugate_by(&self, x: &CMatrix) -> Self {
        Self::symmetrized(x * &self.0 * x.adjoint())
    }

    /// `B self B` for Hermitian `B`.
    pub fn sandwich(&self, b: &HermitianOperator) -> Self {
        Self::symmetrized(&b.0 * &self.0 * &b.0)
    }

    /// Symmetrized product `(AB + BA)/2`.
    pub fn jordan(&self, other: &HermitianOperator) -> Self {
        Self::symmetrized(&self.0 * &other.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &HermitianOperator) -> Self {
        HermitianOperator(self.0.kronecker(&other.0))
    }

    /// Applies `f` to the spectrum: `V f(Λ) V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        let es = eig_unchecked(self);
        let n = self.dim();
        let d = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(f(es.values[i]), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::symmetrized(&es.vectors * d * es.vectors.adjoint())
    }
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Re Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            s += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    s
}

/// Spectrum of a Hermitian operator: real eigenvalues ascending and the
/// corresponding orthonormal eigenvectors as matrix columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenSystem {
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let d = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(self.values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        &self.vectors * d * self.vectors.adjoint()
    }

    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.column(k).iter().copied().collect()
    }
}

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
pub fn eig_hermitian(a: &HermitianOperator) -> Result<EigenSystem> {
    // Re-check: the operator may have been assembled through crate-internal paths.
    let m = a.matrix();
    let asym = max_abs(&(m - m.adjoint()));
    if asym > Tolerances::default().hermitian_rel * max_abs(m) {
        return Err(Error::validation("eig_hermitian: input is not Hermitian"));
    }
    Ok(eig_unchecked(a))
}

pub(crate) fn eig_unchecked(a: &HermitianOperator) -> EigenSystem {
    let n = a.dim();
    let se = SymmetricEigen::new(a.matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| se.eigenvectors[(r, order[c])]);
    EigenSystem { values, vectors }
}

pub fn min_eigenvalue(a: &HermitianOperator) -> f64 {
    eig_unchecked(a).values[0]
}

/// True iff the smallest eigenvalue is at least `-tol`.
pub fn is_psd(a: &HermitianOperator, tol: f64) -> bool {
    min_eigenvalue(a) >= -tol
}

/// Solves `S ρ0 + ρ0 S = 2 ρ1` for Hermitian `S` with the default tolerances.
pub fn solve_lyapunov(
    rho0: &HermitianOperator,
    rho1: &HermitianOperator,
) -> Result<HermitianOperator> {
    solve_lyapunov_with(rho0, rho1, &Tolerances::default())
}

/// Solves `S ρ0 + ρ0 S = 2 ρ1` in the eigenbasis of ρ0.
///
/// With `ρ0 = Σ λ_j |j⟩⟨j|`, the solution is `S_jk = 2 (ρ1)_jk / (λ_j + λ_k)` on
/// the support of ρ0 and zero on its kernel. The kernel of ρ0 must be
/// annihilated by ρ1, which always holds when both come from the same
/// family of positive states.
pub fn solve_lyapunov_with(
    rho0: &HermitianOperator,
    rho1: &HermitianOperator,
    tol: &Tolerances,
) -> Result<HermitianOperator> {
    let n = rho0.dim();
    if rho1.dim() != n {
        return Err(Error::validation(format!(
            "solve_lyapunov: dimension mismatch {} vs {}",
            n,
            rho1.dim()
        )));
    }
    let es = eig_hermitian(rho0)?;
    let lmax = es.values[n - 1];
    if es.values[0] < -tol.psd.max(tol.kernel_rel * lmax.abs()) {
        return Err(Error::validation(format!(
            "solve_lyapunov: rho0 is not positive semidefinite (min eigenvalue {:e})",
            es.values[0]
        )));
    }
    if lmax <= 0.0 {
        return Err(Error::validation("solve_lyapunov: rho0 is zero"));
    }
    let trace = rho0.trace();
    if (trace - 1.0).abs() > tol.trace {
        return Err(Error::validation(format!(
            "solve_lyapunov: rho0 must have unit trace, got {trace}"
        )));
    }
    let kernel_cut = tol.kernel_rel * lmax;
    let v = &es.vectors;
    let r1 = v.adjoint() * rho1.matrix() * v;

    let compat_scale = tol.kernel_compat * 1f64.max(rho1.frobenius_norm());
    for k in 0..n {
        if es.values[k] <= kernel_cut {
            let col_norm = r1.column(k).norm();
            if col_norm > compat_scale {
                return Err(Error::numerical(format!(
                    "solve_lyapunov: rho1 does not vanish on the kernel of rho0 (‖ρ1 v‖ = {col_norm:e})"
                )));
            }
        }
    }

    let s_eig = CMatrix::from_fn(n, n, |j, k| {
        let (lj, lk) = (es.values[j], es.values[k]);
        if lj <= kernel_cut && lk <= kernel_cut {
            Complex64::new(0.0, 0.0)
        } else {
            r1[(j, k)] * (2.0 / (lj.max(0.0) + lk.max(0.0)))
        }
    });
    Ok(HermitianOperator::symmetrized(v * s_eig * v.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density_matrix, random_hermitian, random_unitary, rng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli_x() -> HermitianOperator {
        HermitianOperator::from_real(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn identity_eigenvalues() {
        let es = eig_hermitian(&HermitianOperator::identity(3)).unwrap();
        for v in es.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_eigensystem_is_permuted_identity() {
        let es = eig_hermitian(&HermitianOperator::from_real_diagonal(&[2.0, -1.0])).unwrap();
        assert!((es.values[0] + 1.0).abs() < 1e-14);
        assert!((es.values[1] - 2.0).abs() < 1e-14);
        assert!(es.vectors[(1, 0)].norm() > 1.0 - 1e-14);
        assert!(es.vectors[(0, 1)].norm() > 1.0 - 1e-14);
        assert!(es.vectors[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let mut r = rng(7);
        for _ in 0..20 {
            let a = random_hermitian(8, &mut r);
            let es = eig_hermitian(&a).unwrap();
            let resid = (es.reconstruct() - a.matrix()).norm();
            assert!(resid <= 1e-10 * a.frobenius_norm());
            let gram = es.vectors.adjoint() * &es.vectors;
            let id = CMatrix::identity(8, 8);
            assert!(max_abs(&(gram - id)) < 1e-10);
            assert!(es.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let m =
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            HermitianOperator::new(m),
            Err(Error::Validation(_))
        ));
        let m =
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.5), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(HermitianOperator::new(m).is_err());
    }

    #[test]
    fn slightly_asymmetric_input_is_symmetrized() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.5, 1e-14), c(0.5, 0.0), c(2.0, 0.0)],
        );
        let h = HermitianOperator::new(m).unwrap();
        assert_eq!(h.matrix()[(0, 1)], h.matrix()[(1, 0)].conj());
    }

    #[test]
    fn lyapunov_maximally_mixed() {
        let rho0 = HermitianOperator::identity(2).scaled(0.5);
        let s = solve_lyapunov(&rho0, &pauli_x()).unwrap();
        assert!((s.matrix() - pauli_x().scaled(2.0).matrix()).norm() < 1e-14);
    }

    #[test]
    fn lyapunov_diagonal() {
        let (a, b, cc, d) = (0.3, 0.7, 0.2, -0.5);
        let s = solve_lyapunov(
            &HermitianOperator::from_real_diagonal(&[a, b]),
            &HermitianOperator::from_real_diagonal(&[cc, d]),
        )
        .unwrap();
        let expect = HermitianOperator::from_real_diagonal(&[cc / a, d / b]);
        assert!((s.matrix() - expect.matrix()).norm() < 1e-14);
    }

    fn residual(rho0: &HermitianOperator, rho1: &HermitianOperator, s: &HermitianOperator) -> f64 {
        (s.matrix() * rho0.matrix() + rho0.matrix() * s.matrix()
            - rho1.matrix() * Complex64::new(2.0, 0.0))
        .norm()
    }

    #[test]
    fn lyapunov_random_full_rank() {
        let mut r = rng(11);
        for _ in 0..20 {
            let rho0 = random_density_matrix(6, 6, &mut r);
            let rho1 = random_hermitian(6, &mut r);
            let s = solve_lyapunov(&rho0, &rho1).unwrap();
            assert!(residual(&rho0, &rho1, &s) <= 1e-10 * rho1.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn lyapunov_rank_deficient_and_incompatible() {
        let mut r = rng(12);
        let u = random_unitary(4, &mut r);
        let rho0 = HermitianOperator::from_real_diagonal(&[0.6, 0.4, 0.0, 0.0]).conjugate_by(&u);
        let x = HermitianOperator::from_real(
            4,
            &[
                0.3, 0.1, 0.0, 0.0, //
                0.1, -0.2, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0,
            ],
        )
        .unwrap();
        let rho1 = x.conjugate_by(&u);
        let s = solve_lyapunov(&rho0, &rho1).unwrap();
        assert!(residual(&rho0, &rho1, &s) <= 1e-10);
        // S vanishes on the kernel of rho0.
        let sk = u.adjoint() * s.matrix() * &u;
        for i in 2..4 {
            for j in 0..4 {
                assert!(sk[(i, j)].norm() < 1e-12);
            }
        }
        let bad = HermitianOperator::from_real_diagonal(&[0.0, 0.0, 0.0, 1.0]).conjugate_by(&u);
        assert!(matches!(
            solve_lyapunov(&rho0, &bad),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn lyapunov_rejects_bad_rho0() {
        let rho1 = pauli_x();
        assert!(solve_lyapunov(&HermitianOperator::identity(2), &rho1).is_err());
        assert!(
            solve_lyapunov(&HermitianOperator::from_real_diagonal(&[1.5, -0.5]), &rho1).is_err()
        );
        assert!(solve_lyapunov(&HermitianOperator::identity(3).scaled(1.0 / 3.0), &rho1).is_err());
    }

    #[test]
    fn psd_checks() {
        assert!(is_psd(&HermitianOperator::identity(3), 0.0));
        assert!(!is_psd(
            &HermitianOperator::from_real_diagonal(&[1.0, -1.0]),
            1e-12
        ));
        let mut r = rng(3);
        for _ in 0..20 {
            let rho0 = random_density_matrix(5, 3, &mut r);
            let s = random_hermitian(5, &mut r);
            let shift = s.add_scaled(-0.37, &HermitianOperator::identity(5));
            assert!(is_psd(&rho0.sandwich(&shift), 1e-12));
        }
    }
}
