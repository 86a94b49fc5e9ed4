//! Ã-weighted distance between equal-dimension subspaces of `Im(Ã)`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dense, symmetric_eigen, DenseMatrix, Eps, SymSparseMatrix};

/// A symmetric positive semidefinite `Ã` together with its eigendecomposition on `Im(Ã)`.
#[derive(Debug)]
pub struct ImageOperator {
    a: DenseMatrix,
    /// Orthonormal eigenvectors spanning `Im(Ã)`.
    q: DenseMatrix,
    lambda: Vec<f64>,
}

impl ImageOperator {
    pub fn new(a_tilde: &SymSparseMatrix) -> Result<Arc<Self>> {
        Self::from_dense(a_tilde.to_dense())
    }

    pub fn from_dense(a: DenseMatrix) -> Result<Arc<Self>> {
        let eig = symmetric_eigen(&a)?;
        let lmax = eig.eigenvalues.first().map_or(0.0, |v| v.abs());
        let tol = Eps::default().kernel_rel * lmax;
        let rank = eig.eigenvalues.iter().take_while(|&&v| v > tol && v > 0.0).count();
        let q = DenseMatrix::from_fn(a.nrows(), rank, |i, j| eig.eigenvectors[(i, j)]);
        Ok(Arc::new(Self { a, q, lambda: eig.eigenvalues[..rank].to_vec() }))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn rank(&self) -> usize {
        self.q.ncols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn image_basis(&self) -> &DenseMatrix {
        &self.q
    }

    /// `Q Qᵀ V`.
    pub fn project(&self, v: &DenseMatrix) -> DenseMatrix {
        &self.q * (self.q.transpose() * v)
    }

    /// `Ã^{1/2} V` with the square root taken on `Im(Ã)`.
    pub fn sqrt_apply(&self, v: &DenseMatrix) -> DenseMatrix {
        let mut c = self.q.transpose() * v;
        for i in 0..c.nrows() {
            let s = self.lambda[i].sqrt();
            for j in 0..c.ncols() {
                c[(i, j)] *= s;
            }
        }
        &self.q * c
    }

    /// `Ã^{+1/2} V`, the inverse square root on `Im(Ã)`.
    pub fn inv_sqrt_apply(&self, v: &DenseMatrix) -> DenseMatrix {
        let mut c = self.q.transpose() * v;
        for i in 0..c.nrows() {
            let s = 1.0 / self.lambda[i].sqrt();
            for j in 0..c.ncols() {
                c[(i, j)] *= s;
            }
        }
        &self.q * c
    }

    fn same_as(&self, other: &ImageOperator) -> bool {
        std::ptr::eq(self, other) || (self.n() == other.n() && self.a == other.a)
    }
}

/// Ã-orthonormal basis `Y` (`YᵀÃY = I`) of a subspace of `Im(Ã)`.
#[derive(Clone, Debug)]
pub struct ASubspace {
    pub op: Arc<ImageOperator>,
    pub y: DenseMatrix,
}

impl ASubspace {
    pub fn n_c(&self) -> usize {
        self.y.ncols()
    }

    /// Same subspace with basis `Y O` for an `n_c × n_c` orthogonal `O`.
    pub fn rebased(&self, o: &DenseMatrix) -> Self {
        Self { op: self.op.clone(), y: &self.y * o }
    }
}

/// Projects `V` onto `Im(Ã)` and runs modified Gram-Schmidt (two sweeps) in the Ã inner
/// product. A column whose Ã-norm collapses below `1e-8` of its projected norm is reported.
pub fn a_orthonormalize(op: &Arc<ImageOperator>, v: &DenseMatrix) -> Result<ASubspace> {
    if v.nrows() != op.n() {
        return Err(Error::dims("a_orthonormalize rows", op.n(), v.nrows()));
    }
    let a = &op.a;
    let mut y = op.project(v);
    let m = y.ncols();
    for j in 0..m {
        let before = anorm2(a, y.col_as_slice(j));
        for _sweep in 0..2 {
            for i in 0..j {
                let ay = matcol(a, y.col_as_slice(j));
                let p = dense::dot(y.col_as_slice(i), &ay);
                let yi = y.col_as_slice(i).to_vec();
                y.col_as_slice_mut(j).iter_mut().zip(&yi).for_each(|(x, b)| *x -= p * b);
            }
        }
        let after = anorm2(a, y.col_as_slice(j));
        if !(before > 0.0) || !(after > 1e-16 * before) {
            return Err(Error::RankDeficient { column: j });
        }
        let s = 1.0 / after.sqrt();
        y.col_as_slice_mut(j).iter_mut().for_each(|x| *x *= s);
    }
    Ok(ASubspace { op: op.clone(), y })
}

fn matcol(a: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    let xc = DenseMatrix::from_fn(x.len(), 1, |i, _| x[i]);
    (a * xc).col_as_slice(0).to_vec()
}

fn anorm2(a: &DenseMatrix, x: &[f64]) -> f64 {
    dense::dot(x, &matcol(a, x))
}

fn check_pair(s1: &ASubspace, s2: &ASubspace) -> Result<()> {
    if !s1.op.same_as(&s2.op) {
        return Err(Error::InvalidParameter("subspaces are measured in different Ã".into()));
    }
    if s1.n_c() != s2.n_c() {
        return Err(Error::dims("subspace dimension", s1.n_c(), s2.n_c()));
    }
    Ok(())
}

/// `n_c − ‖Y₁ᵀ Ã Y₂‖_F²` before clamping.
pub fn dist_excess(s1: &ASubspace, s2: &ASubspace) -> Result<f64> {
    check_pair(s1, s2)?;
    let overlap = s1.y.transpose() * (&s1.op.a * &s2.y);
    let f = overlap.norm_l2();
    Ok(s1.n_c() as f64 - f * f)
}

/// `√max(0, n_c − ‖Y₁ᵀ Ã Y₂‖_F²)`.
///
/// Evaluated as `‖Y₂ − Y₁ C‖_Ã` with `C = Y₁ᵀ Ã Y₂`, which equals the expression above for
/// Ã-orthonormal inputs but keeps full relative accuracy for nearly equal spans (the
/// subtraction form bottoms out near `√ε`).
pub fn dist(s1: &ASubspace, s2: &ASubspace) -> Result<f64> {
    let e = dist_excess(s1, s2)?;
    if s1.y == s2.y {
        return Ok(0.0);
    }
    if e < -1e-10 {
        log::warn!("negative distance excess {e:e}: inputs are not Ã-orthonormal");
    }
    let c = s1.y.transpose() * (&s1.op.a * &s2.y);
    let r = &s2.y - &s1.y * &c;
    let ar = &s1.op.a * &r;
    let mut sq = 0.0;
    for j in 0..r.ncols() {
        sq += crate::linalg::dense::dot(r.col_as_slice(j), ar.col_as_slice(j));
    }
    Ok(sq.max(0.0).sqrt())
}

/// `‖Π₁ − Π₂‖_F` for the Euclidean projectors `Π = Ã^{1/2} Y (Ã^{1/2} Y)ᵀ`.
pub fn projector_gap(s1: &ASubspace, s2: &ASubspace) -> Result<f64> {
    check_pair(s1, s2)?;
    let w1 = s1.op.sqrt_apply(&s1.y);
    let w2 = s2.op.sqrt_apply(&s2.y);
    let p1 = &w1 * w1.transpose();
    let p2 = &w2 * w2.transpose();
    Ok((p1 - p2).norm_l2())
}

/// Sines of the principal angles between the spans, ascending, from the singular values of
/// `Y₁ᵀ Ã Y₂`.
pub fn principal_sines(s1: &ASubspace, s2: &ASubspace) -> Result<Vec<f64>> {
    check_pair(s1, s2)?;
    let overlap = s1.y.transpose() * (&s1.op.a * &s2.y);
    if overlap.nrows() == 0 {
        return Ok(Vec::new());
    }
    let sv = overlap
        .singular_values()
        .map_err(|e| Error::Numerical(format!("svd: {e:?}")))?;
    let mut s: Vec<f64> = sv.iter().map(|c| (1.0 - c.min(1.0) * c.min(1.0)).max(0.0).sqrt()).collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(s)
}

/// Violation counts and worst deviations over randomized metric checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub trials: usize,
    pub max_rebasing_change: f64,
    pub min_excess: f64,
    pub max_symmetry_gap: f64,
    /// Largest `d(1,3) − d(1,2) − d(2,3)`.
    pub max_triangle_excess: f64,
    /// Pairs where `dist ≤ 1e-6` and the principal-angle test disagree.
    pub zero_mismatches: usize,
    pub rebasing_violations: usize,
    pub excess_violations: usize,
    pub symmetry_violations: usize,
    pub triangle_violations: usize,
}

impl MetricReport {
    pub fn violations(&self) -> usize {
        self.rebasing_violations
            + self.excess_violations
            + self.symmetry_violations
            + self.triangle_violations
            + self.zero_mismatches
    }

    pub fn merge(&mut self, other: &MetricReport) {
        self.trials += other.trials;
        self.max_rebasing_change = self.max_rebasing_change.max(other.max_rebasing_change);
        self.min_excess = self.min_excess.min(other.min_excess);
        self.max_symmetry_gap = self.max_symmetry_gap.max(other.max_symmetry_gap);
        self.max_triangle_excess = self.max_triangle_excess.max(other.max_triangle_excess);
        self.zero_mismatches += other.zero_mismatches;
        self.rebasing_violations += other.rebasing_violations;
        self.excess_violations += other.excess_violations;
        self.symmetry_violations += other.symmetry_violations;
        self.triangle_violations += other.triangle_violations;
    }
}

pub fn random_orthogonal(m: usize, rng: &mut impl rand::Rng) -> DenseMatrix {
    let g = DenseMatrix::from_fn(m, m, |_, _| StandardNormal.sample(rng));
    dense::orthonormal_columns(&g)
}

pub fn random_subspace(op: &Arc<ImageOperator>, n_c: usize, rng: &mut impl rand::Rng) -> Result<ASubspace> {
    let v = DenseMatrix::from_fn(op.n(), n_c, |_, _| StandardNormal.sample(rng));
    a_orthonormalize(op, &v)
}

/// Randomized checks of basis invariance, nonnegativity, symmetry, the triangle inequality
/// and `dist = 0 ⇔ equal spans` on random subspace triples in `Im(Ã)`.
pub fn check_metric_properties(op: &Arc<ImageOperator>, n_c: usize, trials: usize, seed: u64) -> Result<MetricReport> {
    if n_c == 0 || n_c > op.rank() {
        return Err(Error::CoarseDimension { requested: n_c, available: op.rank() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = MetricReport { trials, ..Default::default() };
    for _ in 0..trials {
        let s1 = random_subspace(op, n_c, &mut rng)?;
        let s2 = random_subspace(op, n_c, &mut rng)?;
        let s3 = random_subspace(op, n_c, &mut rng)?;
        let d12 = dist(&s1, &s2)?;
        let d21 = dist(&s2, &s1)?;
        let d13 = dist(&s1, &s3)?;
        let d23 = dist(&s2, &s3)?;

        let r1 = s1.rebased(&random_orthogonal(n_c, &mut rng));
        let r2 = s2.rebased(&random_orthogonal(n_c, &mut rng));
        let change = (dist(&r1, &r2)? - d12).abs();
        rep.max_rebasing_change = rep.max_rebasing_change.max(change);
        rep.rebasing_violations += (change > 1e-8) as usize;

        let excess = [dist_excess(&s1, &s2)?, dist_excess(&s1, &r1)?, dist_excess(&s2, &s3)?]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        rep.min_excess = rep.min_excess.min(excess);
        rep.excess_violations += (excess < -1e-10) as usize;

        let sym = (d12 - d21).abs();
        rep.max_symmetry_gap = rep.max_symmetry_gap.max(sym);
        rep.symmetry_violations += (sym > 1e-10) as usize;

        let tri = [d13 - d12 - d23, d12 - d13 - d23, d23 - d12 - d13]
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        rep.max_triangle_excess = rep.max_triangle_excess.max(tri);
        rep.triangle_violations += (tri > 1e-8) as usize;

        for (a, b) in [(&s1, &r1), (&s1, &s2)] {
            let zero = dist(a, b)? <= 1e-6;
            let same_span = principal_sines(a, b)?.last().is_none_or(|&s| s <= 1e-6);
            rep.zero_mismatches += (zero != same_span) as usize;
        }
    }
    Ok(rep)
}
