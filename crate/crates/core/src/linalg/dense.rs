use faer::linalg::solvers::{ColPivQr, Llt};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Dense real matrix, column-major.
pub type DenseMatrix = Mat<f64>;

/// Eigenpairs sorted by descending eigenvalue; column `k` of `eigenvectors` pairs with
/// `eigenvalues[k]`.
#[derive(Clone, Debug)]
pub struct EigResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

impl EigResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

fn check_square(a: &DenseMatrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::dims(format!("{what} (square)"), a.nrows(), a.ncols()));
    }
    Ok(())
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrized(a: &DenseMatrix) -> DenseMatrix {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// Full eigendecomposition of a symmetric matrix, descending order.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<EigResult> {
    check_square(a, "symmetric_eigen")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(EigResult {
            eigenvalues: Vec::new(),
            eigenvectors: Mat::zeros(0, 0),
        });
    }
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let eigenvalues: Vec<f64> = (0..n).rev().map(|k| s[k]).collect();
    let eigenvectors = Mat::from_fn(n, n, |i, k| u[(i, n - 1 - k)]);
    Ok(EigResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    check_square(a, "symmetric_eigenvalues")?;
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut v = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver: {e:?}")))?;
    v.reverse();
    Ok(v)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
///
/// A pivot below `rel_tol · max_i b_ii` counts as a failure, so nearly singular
/// matrices are reported as such instead of producing a useless factor.
pub fn cholesky_lower(b: &DenseMatrix, rel_tol: f64) -> Result<DenseMatrix> {
    check_square(b, "cholesky")?;
    let n = b.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let scale = (0..n).map(|i| b[(i, i)].abs()).fold(0.0, f64::max);
    let llt: Llt<f64> = b.llt(Side::Lower).map_err(|e| match e {
        faer::linalg::solvers::LltError::NonPositivePivot { index } => Error::NotSpd { pivot: index },
    })?;
    let l = llt.L().to_owned();
    for k in 0..n {
        let pivot = l[(k, k)] * l[(k, k)];
        if !(pivot > rel_tol * scale) {
            return Err(Error::NotSpd { pivot: k });
        }
    }
    Ok(l)
}

/// Solves `A v = λ B v` for symmetric `A` and symmetric positive definite `B`.
///
/// Reduces to the standard problem `L⁻¹ A L⁻ᵀ y = λ y` with `B = L Lᵀ` and maps back with
/// `v = L⁻ᵀ y`, which makes the eigenvectors B-orthonormal.
pub fn dense_generalized_eig(a: &DenseMatrix, b: &DenseMatrix) -> Result<EigResult> {
    check_square(a, "dense_generalized_eig A")?;
    check_square(b, "dense_generalized_eig B")?;
    if a.nrows() != b.nrows() {
        return Err(Error::dims("dense_generalized_eig", a.nrows(), b.nrows()));
    }
    let l = cholesky_lower(b, 1e-14)?;
    let n = a.nrows();
    // X = L⁻¹ A, then C = L⁻¹ Xᵀ = L⁻¹ A L⁻ᵀ.
    let mut x = a.clone();
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut c = x.transpose().to_owned();
    l.solve_lower_triangular_in_place(c.as_mut());
    let c = symmetrized(&c);
    let std = symmetric_eigen(&c)?;
    let mut v = std.eigenvectors;
    l.transpose().solve_upper_triangular_in_place(v.as_mut());
    debug_assert_eq!(v.nrows(), n);
    Ok(EigResult {
        eigenvalues: std.eigenvalues,
        eigenvectors: v,
    })
}

/// Orthonormal basis of the column span of `v` via Householder QR (no rank check).
pub fn orthonormal_columns(v: &DenseMatrix) -> DenseMatrix {
    if v.ncols() == 0 {
        return Mat::zeros(v.nrows(), 0);
    }
    v.qr().compute_thin_Q()
}

/// Column-pivoted QR rank selection.
///
/// Returns the indices of the columns kept (in original order) and those dropped, where a
/// column is dropped when its pivot `|r_kk|` falls below `rel_tol · |r_00|`. Columns should be
/// comparably scaled before calling.
pub fn pivoted_rank_selection(v: &DenseMatrix, rel_tol: f64) -> (Vec<usize>, Vec<usize>) {
    let m = v.ncols();
    if m == 0 {
        return (Vec::new(), Vec::new());
    }
    let qr: ColPivQr<f64> = v.col_piv_qr();
    let r = qr.R();
    let (fwd, _) = qr.P().arrays();
    let size = v.nrows().min(m);
    let r00 = r[(0, 0)].abs();
    let mut rank = 0;
    for k in 0..size {
        if r[(k, k)].abs() > rel_tol * r00 && r00 > 0.0 {
            rank = k + 1;
        } else {
            break;
        }
    }
    let mut kept: Vec<usize> = fwd[..rank].to_vec();
    let mut dropped: Vec<usize> = fwd[rank..].to_vec();
    kept.sort_unstable();
    dropped.sort_unstable();
    (kept, dropped)
}

/// `max_ij |a_ij - b_ij|`.
pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.norm_l2()
}

/// `‖Vᵀ W V − I‖_∞` (max-entry norm) for a dense weight `W`.
pub fn orthonormality_defect(v: &DenseMatrix, w: &DenseMatrix) -> f64 {
    let g = v.transpose() * (w * v);
    let eye = Mat::<f64>::identity(g.nrows(), g.ncols());
    max_abs_diff(&g, &eye)
}

pub fn column(v: &DenseMatrix, j: usize) -> Vec<f64> {
    v.col_as_slice(j).to_vec()
}

pub fn from_columns(nrows: usize, cols: &[Vec<f64>]) -> DenseMatrix {
    Mat::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
