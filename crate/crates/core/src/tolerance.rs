use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Allowed `max|A - A†| / max|A|` before an operator is rejected as non-Hermitian.
    pub hermitian_rel: f64,
    /// Eigenvalues of ρ0 at or below `kernel_rel * λ_max` are treated as its kernel.
    pub kernel_rel: f64,
    /// Largest `‖ρ1 v‖` tolerated for kernel vectors `v` of ρ0.
    pub kernel_compat: f64,
    /// Eigenvalues of S closer than `degeneracy_rel * (s_max - s_min + 1)` share one outcome.
    pub degeneracy_rel: f64,
    /// Slack on the smallest eigenvalue when checking positivity.
    pub psd: f64,
    /// Allowed `‖Σ M(x) - I‖_F` for a POM.
    pub completeness: f64,
    /// Allowed deviation of a state's trace from one.
    pub trace: f64,
    /// Outcomes less likely than this are skipped in information-gain sums.
    pub negligible_probability: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian_rel: 1e-12,
            kernel_rel: 1e-12,
            kernel_compat: 1e-10,
            degeneracy_rel: 1e-9,
            psd: 1e-10,
            completeness: 1e-8,
            trace: 1e-10,
            negligible_probability: 1e-15,
        }
    }
}
