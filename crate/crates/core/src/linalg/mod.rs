//! Sparse and dense linear algebra substrate shared by every other module.

pub mod dense;
pub mod factor;
pub mod sparse;

pub use dense::{dense_generalized_eig, symmetric_eigen, symmetric_eigenvalues, DenseMatrix, EigResult};
pub use factor::{semidefinite_kernel, SpdFactor};
pub use sparse::SymSparseMatrix;

/// Tolerances used across the toolkit, collected in one place.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Eps {
    /// Eigenvalues of Ã below `kernel_rel · λ_max(Ã)` are treated as kernel.
    pub kernel_rel: f64,
    /// Coarse columns whose pivoted-QR pivot falls below `coarse_drop_rel · |r_00|` are dropped.
    pub coarse_drop_rel: f64,
    /// Diagonal shift `coarse_shift_rel · trace(A₀)/dim` applied once before giving up on A₀.
    pub coarse_shift_rel: f64,
    /// Relative pivot threshold for calling a dense matrix positive definite.
    pub spd_pivot_rel: f64,
}

impl Default for Eps {
    fn default() -> Self {
        Self {
            kernel_rel: 1e-10,
            coarse_drop_rel: 1e-10,
            coarse_shift_rel: 1e-12,
            spd_pivot_rel: 1e-14,
        }
    }
}
