use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Symmetric sparse matrix stored by its upper triangle in compressed row form.
///
/// A full symmetric expansion of the pattern is kept alongside so that whole rows
/// (needed by matvec, graph construction and submatrix extraction) are cheap.
#[derive(Clone, Debug, PartialEq)]
pub struct SymSparseMatrix {
    n: usize,
    up_ptr: Vec<usize>,
    up_col: Vec<usize>,
    up_val: Vec<f64>,
    ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl SymSparseMatrix {
    /// Builds from upper-triangle entries `(row, col, value)` with `row <= col`.
    ///
    /// Entries may arrive in any order; duplicates and lower-triangle entries are rejected.
    pub fn from_upper_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, _) in &entries {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, dim: n });
            }
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, dim: n });
            }
            if i > j {
                return Err(Error::InvalidParameter(format!(
                    "entry ({i}, {j}) lies below the diagonal"
                )));
            }
        }
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        for w in entries.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate entry ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        Ok(Self::from_sorted_upper(n, &entries))
    }

    /// Builds from arbitrary triplets: each `(i, j)` is folded onto the upper triangle and
    /// duplicates are summed. Off-diagonal pairs given twice as `(i, j)` and `(j, i)` are
    /// therefore counted twice; callers assembling a symmetric operator pass each pair once.
    pub fn from_triplets_summed(n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut folded: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in entries {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, dim: n });
            }
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, dim: n });
            }
            folded.push((i.min(j), i.max(j), v));
        }
        folded.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(folded.len());
        for (i, j, v) in folded {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        Ok(Self::from_sorted_upper(n, &merged))
    }

    pub fn identity(n: usize) -> Self {
        let entries: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_sorted_upper(n, &entries)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let entries: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_sorted_upper(diag.len(), &entries)
    }

    /// Dense symmetric input; entries with `|a_ij| == 0` are dropped.
    pub fn from_dense(a: &DenseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::dims("from_dense (square)", a.nrows(), a.ncols()));
        }
        let n = a.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = a[(i, j)];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Ok(Self::from_sorted_upper(n, &entries))
    }

    fn from_sorted_upper(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut up_ptr = vec![0usize; n + 1];
        let mut up_col = Vec::with_capacity(entries.len());
        let mut up_val = Vec::with_capacity(entries.len());
        let mut counts = vec![0usize; n];
        for &(i, j, v) in entries {
            up_ptr[i + 1] += 1;
            up_col.push(j);
            up_val.push(v);
            counts[i] += 1;
            if i != j {
                counts[j] += 1;
            }
        }
        for i in 0..n {
            up_ptr[i + 1] += up_ptr[i];
        }

        let mut ptr = vec![0usize; n + 1];
        for i in 0..n {
            ptr[i + 1] = ptr[i] + counts[i];
        }
        let nnz = ptr[n];
        let mut col = vec![0usize; nnz];
        let mut val = vec![0.0; nnz];
        let mut fill = ptr.clone();
        // Mirrored entries (c < r) are all placed before stored ones (c >= r); both passes walk
        // the upper triangle row-major, so every full row comes out sorted.
        for &(i, j, v) in entries {
            if i != j {
                let slot = fill[j];
                col[slot] = i;
                val[slot] = v;
                fill[j] += 1;
            }
        }
        for &(i, j, v) in entries {
            let slot = fill[i];
            col[slot] = j;
            val[slot] = v;
            fill[i] += 1;
        }
        debug_assert!((0..n).all(|r| col[ptr[r]..ptr[r + 1]].windows(2).all(|w| w[0] < w[1])));

        Self {
            n,
            up_ptr,
            up_col,
            up_val,
            ptr,
            col,
            val,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored upper-triangle entries.
    pub fn nnz_upper(&self) -> usize {
        self.up_col.len()
    }

    /// Number of nonzeros of the full symmetric matrix.
    pub fn nnz_full(&self) -> usize {
        self.col.len()
    }

    /// Upper-triangle entries in row-major sorted order.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.up_ptr[i]..self.up_ptr[i + 1]).map(move |k| (i, self.up_col[k], self.up_val[k]))
        })
    }

    /// Full symmetric row `i`: sorted column indices and values.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.ptr[i], self.ptr[i + 1]);
        (&self.col[s..e], &self.val[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.up_val.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Infinity norm (max absolute row sum), an upper bound on the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::dims("matvec", self.n, x.len()));
        }
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x`; panics on length mismatch.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.ptr[i], self.ptr[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.val[k] * x[self.col[k]];
            }
            *yi = acc;
        }
    }

    /// `R A Rᵀ` for the index set `idx` (strictly increasing).
    pub fn extract_principal_submatrix(&self, idx: &[usize]) -> Result<Self> {
        for w in idx.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidParameter(
                    "submatrix index set must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = idx.last() {
            if last >= self.n {
                return Err(Error::IndexOutOfRange { index: last, dim: self.n });
            }
        }
        let mut local = vec![usize::MAX; self.n];
        for (p, &g) in idx.iter().enumerate() {
            local[g] = p;
        }
        let mut entries = Vec::new();
        for (p, &g) in idx.iter().enumerate() {
            for k in self.up_ptr[g]..self.up_ptr[g + 1] {
                let q = local[self.up_col[k]];
                if q != usize::MAX {
                    entries.push((p, q, self.up_val[k]));
                }
            }
        }
        // `idx` increasing keeps p <= q and the row-major order.
        Ok(Self::from_sorted_upper(idx.len(), &entries))
    }

    /// `A + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.n {
            return Err(Error::dims("add_diagonal", self.n, d.len()));
        }
        let entries = self
            .upper_entries()
            .chain(d.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, &v)| (i, i, v)));
        Self::from_triplets_summed(self.n, entries)
    }

    /// `D A D` for a diagonal `D` given by its entries.
    pub fn scale_symmetric(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.n {
            return Err(Error::dims("scale_symmetric", self.n, d.len()));
        }
        let entries: Vec<_> = self.upper_entries().map(|(i, j, v)| (i, j, d[i] * v * d[j])).collect();
        Ok(Self::from_sorted_upper(self.n, &entries))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let entries: Vec<_> = self.upper_entries().map(|(i, j, v)| (i, j, c * v)).collect();
        Self::from_sorted_upper(self.n, &entries)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.upper_entries() {
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        a
    }

    /// `A X` for a dense block of columns.
    pub fn mul_dense(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.nrows() != self.n {
            return Err(Error::dims("mul_dense", self.n, x.nrows()));
        }
        let mut y = DenseMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            self.matvec_into(x.col_as_slice(c), y.col_as_slice_mut(c));
        }
        Ok(y)
    }
}
