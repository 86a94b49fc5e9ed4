use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt_pivoting::factor as piv_llt;
use faer::{Mat, Par, Side};

use super::dense::{cholesky_lower, orthonormal_columns, DenseMatrix};
use super::sparse::SymSparseMatrix;
use crate::error::{Error, Result};

/// Above this dimension SPD factorizations switch from dense to sparse Cholesky.
pub const DENSE_FACTOR_LIMIT: usize = 5000;

enum Backend {
    Dense(DenseMatrix),
    Sparse(faer::sparse::linalg::solvers::Llt<usize, f64>),
}

/// Cholesky factorization of a symmetric positive definite matrix, read-only after
/// construction and safe to share across threads.
pub struct SpdFactor {
    n: usize,
    backend: Backend,
}

impl std::fmt::Debug for SpdFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.backend {
            Backend::Dense(_) => "dense",
            Backend::Sparse(_) => "sparse",
        };
        f.debug_struct("SpdFactor").field("n", &self.n).field("backend", &kind).finish()
    }
}

impl SpdFactor {
    pub fn new(a: &SymSparseMatrix) -> Result<Self> {
        if a.n() <= DENSE_FACTOR_LIMIT {
            Self::dense(&a.to_dense())
        } else {
            Self::sparse(a)
        }
    }

    pub fn dense(a: &DenseMatrix) -> Result<Self> {
        let l = cholesky_lower(a, 1e-14)?;
        Ok(Self {
            n: a.nrows(),
            backend: Backend::Dense(l),
        })
    }

    fn sparse(a: &SymSparseMatrix) -> Result<Self> {
        let n = a.n();
        let mut triplets = Vec::with_capacity(a.nnz_upper());
        for (i, j, v) in a.upper_entries() {
            // lower triangle in column-major terms: row >= col
            triplets.push(Triplet::new(j, i, v));
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Numerical(format!("sparse matrix creation: {e:?}")))?;
        let llt = mat.sp_cholesky(Side::Lower).map_err(|e| match e {
            faer::sparse::linalg::LltError::Numeric(
                faer::linalg::solvers::LltError::NonPositivePivot { index },
            ) => Error::NotSpd { pivot: index },
            other => Error::Numerical(format!("sparse cholesky: {other:?}")),
        })?;
        Ok(Self {
            n,
            backend: Backend::Sparse(llt),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::dims("solve", self.n, b.len()));
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    /// Overwrites `x` (holding the right-hand side) with the solution; panics on length mismatch.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        if self.n == 0 {
            return;
        }
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| x[i]);
        self.solve_mat_in_place(&mut rhs);
        x.copy_from_slice(rhs.col_as_slice(0));
    }

    /// Solves for every column of `rhs` in place.
    pub fn solve_mat_in_place(&self, rhs: &mut DenseMatrix) {
        assert_eq!(rhs.nrows(), self.n);
        match &self.backend {
            Backend::Dense(l) => {
                l.solve_lower_triangular_in_place(rhs.as_mut());
                l.transpose().solve_upper_triangular_in_place(rhs.as_mut());
            }
            Backend::Sparse(llt) => llt.solve_in_place(rhs.as_mut()),
        }
    }

    /// Dense inverse; only sensible for small factors.
    pub fn inverse(&self) -> DenseMatrix {
        let mut inv = Mat::<f64>::identity(self.n, self.n);
        self.solve_mat_in_place(&mut inv);
        inv
    }
}

/// Euclidean-orthonormal basis of `ker(A)` for symmetric positive semidefinite `A`, computed
/// by diagonally pivoted Cholesky without an eigensolve.
///
/// The numerical rank is the number of pivots `l_kk²` above `rel_tol · max_i a_ii`; the
/// trailing block then spans the kernel.
pub fn semidefinite_kernel(a: &DenseMatrix, rel_tol: f64) -> Result<DenseMatrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dims("semidefinite_kernel (square)", n, a.ncols()));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    if scale <= 0.0 {
        return Ok(Mat::<f64>::identity(n, n));
    }
    let mut w = a.clone();
    let mut perm = vec![0usize; n];
    let mut perm_inv = vec![0usize; n];
    let mut buf = MemBuffer::new(piv_llt::cholesky_in_place_scratch::<usize, f64>(
        n,
        Par::Seq,
        Default::default(),
    ));
    let (info, _) = piv_llt::cholesky_in_place::<usize, f64>(
        w.as_mut(),
        &mut perm,
        &mut perm_inv,
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|_| Error::Numerical("pivoted cholesky hit a negative or NaN diagonal".into()))?;
    // The factorization's own stopping rule is far tighter than `rel_tol`; truncate at the
    // first pivot below the relative threshold (pivots are non-increasing).
    let rank = (0..info.rank)
        .find(|&k| w[(k, k)] * w[(k, k)] <= rel_tol * scale)
        .unwrap_or(info.rank);
    let m = n - rank;
    if m == 0 {
        return Ok(Mat::zeros(n, 0));
    }
    // Permuted A = [L11; L21] [L11ᵀ L21ᵀ] on the leading block; kernel of the permuted matrix
    // is spanned by [-L11⁻ᵀ L21ᵀ; I].
    let l11 = Mat::from_fn(rank, rank, |i, j| if i >= j { w[(i, j)] } else { 0.0 });
    let mut top = Mat::from_fn(rank, m, |i, j| -w[(rank + j, i)]);
    if rank > 0 {
        l11.transpose().solve_upper_triangular_in_place(top.as_mut());
    }
    let mut basis = Mat::<f64>::zeros(n, m);
    for j in 0..m {
        for i in 0..rank {
            basis[(perm[i], j)] = top[(i, j)];
        }
        basis[(perm[rank + j], j)] = 1.0;
    }
    Ok(orthonormal_columns(&basis))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_solve() {
        let a = SymSparseMatrix::from_diagonal(&[4.0; 6]);
        let f = SpdFactor::new(&a).unwrap();
        let x = f.solve(&[8.0; 6]).unwrap();
        assert!(x.iter().all(|v| (v - 2.0).abs() < 1e-15));
    }

    #[test]
    fn zero_pivot_is_not_spd() {
        let a = SymSparseMatrix::from_upper_triplets(3, vec![(0, 0, 1.0), (2, 2, 1.0)]).unwrap();
        assert!(matches!(SpdFactor::new(&a), Err(Error::NotSpd { pivot: 1 })));
    }

    #[test]
    fn kernel_of_path_laplacian() {
        let n = 6;
        let mut e = Vec::new();
        for i in 0..n {
            let deg = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            e.push((i, i, deg));
            if i + 1 < n {
                e.push((i, i + 1, -1.0));
            }
        }
        let a = SymSparseMatrix::from_upper_triplets(n, e).unwrap().to_dense();
        let k = semidefinite_kernel(&a, 1e-10).unwrap();
        assert_eq!(k.ncols(), 1);
        let c = k[(0, 0)];
        for i in 0..n {
            assert!((k[(i, 0)] - c).abs() < 1e-12);
        }
        assert!((c.abs() - 1.0 / (n as f64).sqrt()).abs() < 1e-12);
    }
}
