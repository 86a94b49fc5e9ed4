//! Two-level additive Schwarz preconditioner `M⁻¹ = M₁⁻¹ + R₀ᵀ A₀⁻¹ R₀`.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::Decomposition;
use crate::error::{Error, Result};
use crate::linalg::dense::{cholesky_lower, pivoted_rank_selection};
use crate::linalg::{symmetric_eigenvalues, Eps, DenseMatrix, SpdFactor, SymSparseMatrix};
use crate::spectral::LocalCoarseSpace;

/// Largest `n` accepted by the dense operator and spectrum routines.
pub const DENSE_SPECTRUM_CAP: usize = 4096;

/// Anything that can be applied as `z = M⁻¹ r`.
pub trait Preconditioner: Sync {
    fn n(&self) -> usize;
    fn apply_into(&self, r: &[f64], z: &mut [f64]);

    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n() {
            return Err(Error::dims("preconditioner apply", self.n(), r.len()));
        }
        let mut z = vec![0.0; r.len()];
        self.apply_into(r, &mut z);
        Ok(z)
    }
}

/// `M = I`.
#[derive(Clone, Copy, Debug)]
pub struct IdentityPreconditioner(pub usize);

impl Preconditioner for IdentityPreconditioner {
    fn n(&self) -> usize {
        self.0
    }

    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Exact inverse through one global factorization.
#[derive(Debug)]
pub struct ExactPreconditioner(pub SpdFactor);

impl Preconditioner for ExactPreconditioner {
    fn n(&self) -> usize {
        self.0.n()
    }

    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.0.solve_in_place(z);
    }
}

/// First-level variant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level1Variant {
    /// `Σ R_iᵀ A_i⁻¹ R_i`, symmetric positive definite.
    #[default]
    SymmetricAs,
    /// `Σ R_iᵀ D_i A_i⁻¹ R_i`, not symmetric in general.
    WeightedAs,
}

struct Subdomain {
    indices: Vec<usize>,
    weights: Vec<f64>,
    factor: SpdFactor,
    /// Kept coarse columns `D_i Z_i` restricted to `V_i`, unit Euclidean norm.
    coarse: DenseMatrix,
    /// Offset of this block in the coarse vector.
    offset: usize,
}

/// Assembly diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoarseInfo {
    /// Columns offered per subdomain before dropping.
    pub offered: Vec<usize>,
    /// Columns kept per subdomain.
    pub kept: Vec<usize>,
    pub dropped: usize,
    pub dim: usize,
    /// Whether the coarse Cholesky needed the diagonal shift.
    pub shifted: bool,
}

pub struct TwoLevelPreconditioner {
    n: usize,
    variant: Level1Variant,
    subdomains: Vec<Subdomain>,
    a0: Option<SpdFactor>,
    a0_dense: DenseMatrix,
    info: CoarseInfo,
}

impl std::fmt::Debug for TwoLevelPreconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TwoLevelPreconditioner")
            .field("n", &self.n)
            .field("variant", &self.variant)
            .field("k", &self.subdomains.len())
            .field("info", &self.info)
            .finish()
    }
}

impl TwoLevelPreconditioner {
    /// Factors the local Dirichlet blocks `A_i = R_i A R_iᵀ` and, when `coarse` is given,
    /// assembles the coarse operator from `R₀ᵀ = [R₁ᵀ D₁ Z₁ … R_kᵀ D_k Z_k]`.
    pub fn assemble(
        a: &SymSparseMatrix,
        decomp: &Decomposition,
        coarse: Option<&[LocalCoarseSpace]>,
        variant: Level1Variant,
    ) -> Result<Self> {
        let n = a.n();
        if decomp.n() != n {
            return Err(Error::dims("decomposition size", n, decomp.n()));
        }
        let k = decomp.k();
        if let Some(cs) = coarse {
            if cs.len() != k {
                return Err(Error::dims("coarse space count", k, cs.len()));
            }
            for (i, c) in cs.iter().enumerate() {
                if c.n() != decomp.overlapping(i).len() {
                    return Err(Error::Subdomain {
                        subdomain: i,
                        message: Error::dims("coarse basis rows", decomp.overlapping(i).len(), c.n()).to_string(),
                    });
                }
            }
        }
        let mut subdomains: Vec<Subdomain> = (0..k)
            .into_par_iter()
            .map(|i| {
                let indices = decomp.overlapping(i).to_vec();
                let weights = decomp.pou_weights(i);
                let local = a.extract_principal_submatrix(&indices)?;
                let factor = SpdFactor::new(&local).map_err(|e| Error::Subdomain {
                    subdomain: i,
                    message: e.to_string(),
                })?;
                let block = match coarse {
                    Some(cs) => weighted_normalized(&cs[i].z, &weights),
                    None => Mat::zeros(indices.len(), 0),
                };
                Ok(Subdomain { indices, weights, factor, coarse: block, offset: 0 })
            })
            .collect::<Result<_>>()?;

        let offered: Vec<usize> = subdomains.iter().map(|s| s.coarse.ncols()).collect();
        let total: usize = offered.iter().sum();
        let mut info = CoarseInfo { offered: offered.clone(), ..Default::default() };
        let mut a0 = None;
        let mut a0_dense = Mat::zeros(0, 0);
        if total > 0 {
            let kept = drop_dependent_columns(n, &mut subdomains);
            info.kept = kept;
            info.dim = info.kept.iter().sum();
            info.dropped = total - info.dim;
            let mut off = 0;
            for s in subdomains.iter_mut() {
                s.offset = off;
                off += s.coarse.ncols();
            }
            a0_dense = coarse_matrix(a, &subdomains, info.dim)?;
            let (f, shifted) = factor_coarse(&a0_dense, &subdomains)?;
            info.shifted = shifted;
            a0 = Some(f);
        } else {
            info.kept = vec![0; k];
        }
        if info.dropped > 0 {
            log::info!("dropped {} near-dependent coarse columns", info.dropped);
        }
        Ok(Self { n, variant, subdomains, a0, a0_dense, info })
    }

    pub fn variant(&self) -> Level1Variant {
        self.variant
    }

    pub fn coarse_info(&self) -> &CoarseInfo {
        &self.info
    }

    pub fn coarse_dim(&self) -> usize {
        self.info.dim
    }

    /// The assembled coarse matrix `A₀ = R₀ A R₀ᵀ` in the normalized column basis.
    pub fn coarse_matrix(&self) -> &DenseMatrix {
        &self.a0_dense
    }

    /// The kept columns of `R₀ᵀ` as a dense `n × dim` matrix.
    pub fn coarse_basis(&self) -> DenseMatrix {
        let mut e = Mat::zeros(self.n, self.info.dim);
        for s in &self.subdomains {
            for c in 0..s.coarse.ncols() {
                for (p, &g) in s.indices.iter().enumerate() {
                    e[(g, s.offset + c)] = s.coarse[(p, c)];
                }
            }
        }
        e
    }

    /// Applies only the first level.
    pub fn apply_level1(&self, r: &[f64], z: &mut [f64]) {
        let locals: Vec<Vec<f64>> = self
            .subdomains
            .par_iter()
            .map(|s| {
                let mut x: Vec<f64> = s.indices.iter().map(|&g| r[g]).collect();
                s.factor.solve_in_place(&mut x);
                if self.variant == Level1Variant::WeightedAs {
                    x.iter_mut().zip(&s.weights).for_each(|(v, w)| *v *= w);
                }
                x
            })
            .collect();
        z.iter_mut().for_each(|v| *v = 0.0);
        for (s, x) in self.subdomains.iter().zip(&locals) {
            for (&g, v) in s.indices.iter().zip(x) {
                z[g] += v;
            }
        }
    }

    /// Adds `R₀ᵀ A₀⁻¹ R₀ r` to `z`.
    fn add_coarse(&self, r: &[f64], z: &mut [f64]) {
        let Some(f) = &self.a0 else { return };
        let mut c = vec![0.0; self.info.dim];
        for s in &self.subdomains {
            for j in 0..s.coarse.ncols() {
                let col = s.coarse.col_as_slice(j);
                c[s.offset + j] = s.indices.iter().zip(col).map(|(&g, e)| r[g] * e).sum();
            }
        }
        f.solve_in_place(&mut c);
        for s in &self.subdomains {
            for j in 0..s.coarse.ncols() {
                let cj = c[s.offset + j];
                let col = s.coarse.col_as_slice(j);
                for (&g, e) in s.indices.iter().zip(col) {
                    z[g] += cj * e;
                }
            }
        }
    }

    /// `M⁻¹` as a dense matrix, built blockwise from local inverses.
    pub fn dense_inverse(&self) -> Result<DenseMatrix> {
        if self.n > DENSE_SPECTRUM_CAP {
            return Err(Error::DenseCapExceeded { n: self.n, cap: DENSE_SPECTRUM_CAP });
        }
        let mut m = Mat::zeros(self.n, self.n);
        for s in &self.subdomains {
            let inv = s.factor.inverse();
            for (q, &gq) in s.indices.iter().enumerate() {
                for (p, &gp) in s.indices.iter().enumerate() {
                    let w = match self.variant {
                        Level1Variant::SymmetricAs => 1.0,
                        Level1Variant::WeightedAs => s.weights[p],
                    };
                    m[(gp, gq)] += w * inv[(p, q)];
                }
            }
        }
        if let Some(f) = &self.a0 {
            let e = self.coarse_basis();
            let mut x = e.transpose().to_owned();
            f.solve_mat_in_place(&mut x);
            m += &e * &x;
        }
        Ok(m)
    }
}

impl Preconditioner for TwoLevelPreconditioner {
    fn n(&self) -> usize {
        self.n
    }

    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        assert_eq!(r.len(), self.n);
        self.apply_level1(r, z);
        self.add_coarse(r, z);
    }
}

/// `D_i Z_i` with each column scaled to unit Euclidean norm; zero columns are removed.
fn weighted_normalized(z: &DenseMatrix, weights: &[f64]) -> DenseMatrix {
    let cols: Vec<Vec<f64>> = (0..z.ncols())
        .map(|j| z.col_as_slice(j).iter().zip(weights).map(|(a, w)| a * w).collect::<Vec<f64>>())
        .filter_map(|c| {
            let nrm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            (nrm > 0.0).then(|| c.into_iter().map(|v| v / nrm).collect())
        })
        .collect();
    Mat::from_fn(weights.len(), cols.len(), |i, j| cols[j][i])
}

/// Pivoted QR on the global `R₀ᵀ`, keeping the columns whose pivots stay above the relative
/// tolerance. Returns the kept count per subdomain.
fn drop_dependent_columns(n: usize, subdomains: &mut [Subdomain]) -> Vec<usize> {
    let total: usize = subdomains.iter().map(|s| s.coarse.ncols()).sum();
    let mut e = Mat::<f64>::zeros(n, total);
    let mut owner = Vec::with_capacity(total);
    let mut c0 = 0;
    for (i, s) in subdomains.iter().enumerate() {
        for j in 0..s.coarse.ncols() {
            for (p, &g) in s.indices.iter().enumerate() {
                e[(g, c0 + j)] = s.coarse[(p, j)];
            }
            owner.push((i, j));
        }
        c0 += s.coarse.ncols();
    }
    let (kept, _) = pivoted_rank_selection(&e, Eps::default().coarse_drop_rel);
    let mut keep_local: Vec<Vec<usize>> = vec![Vec::new(); subdomains.len()];
    for c in kept {
        let (i, j) = owner[c];
        keep_local[i].push(j);
    }
    for (s, keep) in subdomains.iter_mut().zip(&keep_local) {
        if keep.len() != s.coarse.ncols() {
            let old = std::mem::replace(&mut s.coarse, Mat::zeros(0, 0));
            s.coarse = Mat::from_fn(old.nrows(), keep.len(), |p, c| old[(p, keep[c])]);
        }
    }
    keep_local.iter().map(Vec::len).collect()
}

fn coarse_matrix(a: &SymSparseMatrix, subdomains: &[Subdomain], dim: usize) -> Result<DenseMatrix> {
    let n = a.n();
    let mut e = Mat::<f64>::zeros(n, dim);
    for s in subdomains {
        for j in 0..s.coarse.ncols() {
            for (p, &g) in s.indices.iter().enumerate() {
                e[(g, s.offset + j)] = s.coarse[(p, j)];
            }
        }
    }
    let ae = a.mul_dense(&e)?;
    let a0 = e.transpose() * &ae;
    Ok(Mat::from_fn(dim, dim, |i, j| 0.5 * (a0[(i, j)] + a0[(j, i)])))
}

fn owner_of(subdomains: &[Subdomain], col: usize) -> usize {
    subdomains
        .iter()
        .position(|s| col >= s.offset && col < s.offset + s.coarse.ncols())
        .unwrap_or(0)
}

/// Cholesky of `A₀`, retried once with the shift `1e-12 · trace / dim`.
fn factor_coarse(a0: &DenseMatrix, subdomains: &[Subdomain]) -> Result<(SpdFactor, bool)> {
    let first = match SpdFactor::dense(a0) {
        Ok(f) => return Ok((f, false)),
        Err(Error::NotSpd { pivot }) => pivot,
        Err(e) => return Err(e),
    };
    let dim = a0.nrows();
    let trace: f64 = (0..dim).map(|i| a0[(i, i)]).sum();
    let shift = Eps::default().coarse_shift_rel * trace / dim as f64;
    let shifted = Mat::from_fn(dim, dim, |i, j| a0[(i, j)] + if i == j { shift } else { 0.0 });
    match SpdFactor::dense(&shifted) {
        Ok(f) => {
            log::warn!("coarse matrix needed a diagonal shift of {shift:e}");
            Ok((f, true))
        }
        Err(Error::NotSpd { pivot }) => {
            let mut ids = vec![owner_of(subdomains, first), owner_of(subdomains, pivot)];
            ids.sort_unstable();
            ids.dedup();
            Err(Error::SingularCoarse { subdomains: ids })
        }
        Err(e) => Err(e),
    }
}

/// Spectrum of `M⁻¹ A` for a symmetric preconditioner, computed as the eigenvalues of
/// `Lᵀ M⁻¹ L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct PreconditionedSpectrum {
    /// Eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// `λ_max / λ_min` over the positive part of the spectrum.
    pub kappa: f64,
}

impl PreconditionedSpectrum {
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.iter().copied().filter(|&l| l > 0.0).fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }
}

pub fn dense_preconditioned_spectrum(a: &SymSparseMatrix, m_inv: &DenseMatrix) -> Result<PreconditionedSpectrum> {
    let n = a.n();
    if n > DENSE_SPECTRUM_CAP {
        return Err(Error::DenseCapExceeded { n, cap: DENSE_SPECTRUM_CAP });
    }
    if m_inv.nrows() != n || m_inv.ncols() != n {
        return Err(Error::dims("preconditioner size", n, m_inv.nrows()));
    }
    let l = cholesky_lower(&a.to_dense(), Eps::default().spd_pivot_rel)?;
    let c = l.transpose() * (m_inv * &l);
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let eigenvalues = symmetric_eigenvalues(&c)?;
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    let bottom = eigenvalues
        .iter()
        .copied()
        .filter(|&x| x > 1e-14 * top.abs())
        .fold(f64::INFINITY, f64::min);
    Ok(PreconditionedSpectrum { kappa: top / bottom, eigenvalues })
}

/// Dense spectrum of a two-level preconditioner; only the symmetric variant has a real
/// symmetric reduction.
pub fn preconditioned_spectrum(a: &SymSparseMatrix, m: &TwoLevelPreconditioner) -> Result<PreconditionedSpectrum> {
    if m.variant() != Level1Variant::SymmetricAs {
        return Err(Error::InvalidParameter(
            "dense spectrum requires the symmetric first-level variant".into(),
        ));
    }
    dense_preconditioned_spectrum(a, &m.dense_inverse()?)
}
