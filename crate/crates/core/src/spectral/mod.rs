//! Local generalized spectral problems and the coarse bases built from them.

mod verify;

pub use verify::{verify_stable_decomposition, StabilityProbe, StabilityReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decomp::Decomposition;
use crate::error::{Error, Result};
use crate::linalg::{dense, dense_generalized_eig, symmetric_eigen, DenseMatrix, SymSparseMatrix};

/// Restricted operators of one overlapping subdomain, in the local ordering of `V_i`.
#[derive(Clone, Debug)]
pub struct LocalBlocks {
    pub subdomain: usize,
    /// Global indices of `V_i`, increasing.
    pub indices: Vec<usize>,
    pub halo: Vec<bool>,
    /// `A_i = R_i A R_iᵀ`.
    pub a_local: SymSparseMatrix,
    /// `A_i` with each halo diagonal reduced by its exterior coupling `s_j`.
    pub a_tilde: SymSparseMatrix,
    /// `s_j = Σ_{l ∉ V_i} |A_jl|` on halo vertices, zero elsewhere.
    pub s: Vec<f64>,
    /// Partition-of-unity weights `1/d_v`.
    pub d: Vec<f64>,
    /// Multiplicities `d_v`.
    pub multiplicity: Vec<usize>,
}

impl LocalBlocks {
    pub fn n(&self) -> usize {
        self.indices.len()
    }

    /// `D_i A_i D_i`.
    pub fn dad(&self) -> SymSparseMatrix {
        self.a_local.scale_symmetric(&self.d).expect("weights match block size")
    }
}

pub fn build_local_blocks(a: &SymSparseMatrix, decomp: &Decomposition, i: usize) -> Result<LocalBlocks> {
    if i >= decomp.k() {
        return Err(Error::IndexOutOfRange { index: i, dim: decomp.k() });
    }
    if a.n() != decomp.n() {
        return Err(Error::dims("decomposition vs matrix", a.n(), decomp.n()));
    }
    let indices = decomp.overlapping(i).to_vec();
    let halo = decomp.halo_flags(i).to_vec();
    let a_local = a.extract_principal_submatrix(&indices)?;
    let mut s = vec![0.0; indices.len()];
    for (p, &g) in indices.iter().enumerate() {
        if !halo[p] {
            continue;
        }
        let (cols, vals) = a.row(g);
        s[p] = cols
            .iter()
            .zip(vals)
            .filter(|(&c, _)| indices.binary_search(&c).is_err())
            .map(|(_, v)| v.abs())
            .sum();
    }
    let neg: Vec<f64> = s.iter().map(|v| -v).collect();
    let a_tilde = a_local.add_diagonal(&neg)?;
    let multiplicity = indices.iter().map(|&g| decomp.multiplicity()[g]).collect();
    Ok(LocalBlocks {
        subdomain: i,
        d: decomp.pou_weights(i),
        indices,
        halo,
        a_local,
        a_tilde,
        s,
        multiplicity,
    })
}

pub fn build_all_blocks(a: &SymSparseMatrix, decomp: &Decomposition) -> Result<Vec<LocalBlocks>> {
    use rayon::prelude::*;
    (0..decomp.k()).into_par_iter().map(|i| build_local_blocks(a, decomp, i)).collect()
}

/// Kernel and image of `Ã` and the part of the kernel the coarse space must carry.
#[derive(Clone, Debug)]
pub struct KernelBases {
    /// Euclidean-orthonormal basis of `ker(Ã)`.
    pub kernel: DenseMatrix,
    /// Orthonormal basis of the complement of `ker(DAD) ∩ ker(Ã)` inside `ker(Ã)`.
    pub joint_perp: DenseMatrix,
    /// Orthonormal eigenvectors of `Ã` spanning `Im(Ã)`, by descending eigenvalue.
    pub image: DenseMatrix,
    pub image_eigenvalues: Vec<f64>,
}

/// Splits `Ã` into kernel and image by a dense eigendecomposition, eigenvalues below
/// `rel_tol · λ_max` counting as zero.
pub fn kernel_bases_dense(dad: &DenseMatrix, a_tilde: &DenseMatrix, rel_tol: f64) -> Result<KernelBases> {
    let n = a_tilde.nrows();
    if dad.nrows() != n || dad.ncols() != n {
        return Err(Error::dims("weighted block", n, dad.nrows()));
    }
    let eig = symmetric_eigen(a_tilde)?;
    let lmax = eig.eigenvalues.first().map_or(0.0, |v| v.abs());
    let rank = eig.eigenvalues.iter().take_while(|&&v| v > rel_tol * lmax && v > 0.0).count();
    let image = DenseMatrix::from_fn(n, rank, |i, j| eig.eigenvectors[(i, j)]);
    let kernel = DenseMatrix::from_fn(n, n - rank, |i, j| eig.eigenvectors[(i, rank + j)]);
    let joint_perp = if kernel.ncols() == 0 {
        kernel.clone()
    } else {
        let g = dense::symmetrized(&(kernel.transpose() * (dad * &kernel)));
        let ge = symmetric_eigen(&g)?;
        let scale = dense_inf_norm(dad);
        let keep = ge.eigenvalues.iter().take_while(|&&v| v > rel_tol * scale).count();
        let c = DenseMatrix::from_fn(g.nrows(), keep, |i, j| ge.eigenvectors[(i, j)]);
        &kernel * &c
    };
    Ok(KernelBases {
        kernel,
        joint_perp,
        image,
        image_eigenvalues: eig.eigenvalues[..rank].to_vec(),
    })
}

pub fn kernel_bases(blocks: &LocalBlocks) -> Result<KernelBases> {
    kernel_bases_dense(&blocks.dad().to_dense(), &blocks.a_tilde.to_dense(), crate::linalg::Eps::default().kernel_rel)
}

fn dense_inf_norm(a: &DenseMatrix) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// How many eigenvectors of the pencil enter the coarse space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Selection {
    /// The `n_c` largest eigenvalues.
    Fixed { n_c: usize },
    /// Every eigenvalue `≥ tau`, at most `max` of them.
    Adaptive { tau: f64, max: Option<usize> },
}

impl Selection {
    pub fn fixed(n_c: usize) -> Self {
        Selection::Fixed { n_c }
    }

    fn count(&self, eigenvalues: &[f64]) -> Result<usize> {
        match *self {
            Selection::Fixed { n_c } => {
                if n_c > eigenvalues.len() {
                    return Err(Error::CoarseDimension { requested: n_c, available: eigenvalues.len() });
                }
                Ok(n_c)
            }
            Selection::Adaptive { tau, max } => {
                let above = eigenvalues.iter().take_while(|&&v| v.abs() >= tau).count();
                Ok(max.map_or(above, |m| above.min(m)))
            }
        }
    }
}

/// Solution of the projected pencil on one subdomain.
#[derive(Clone, Debug)]
pub struct PencilSolution {
    pub bases: KernelBases,
    /// All eigenvalues of `(Qᵀ DAD Q, Qᵀ Ã Q)`, descending.
    pub eigenvalues: Vec<f64>,
    /// The eigenvectors lifted by `Q`; Ã-orthonormal, one column per eigenvalue.
    pub vectors: DenseMatrix,
}

/// Reduces the pencil `(DAD, Ã)` to `Im(Ã)` and solves it densely.
pub fn solve_pencil(dad: &DenseMatrix, a_tilde: &DenseMatrix, rel_tol: f64) -> Result<PencilSolution> {
    let bases = kernel_bases_dense(dad, a_tilde, rel_tol)?;
    let q = &bases.image;
    let r = q.ncols();
    if r == 0 {
        return Ok(PencilSolution {
            eigenvalues: Vec::new(),
            vectors: DenseMatrix::zeros(a_tilde.nrows(), 0),
            bases,
        });
    }
    let lhs = dense::symmetrized(&(q.transpose() * (dad * q)));
    let rhs = dense::symmetrized(&(q.transpose() * (a_tilde * q)));
    let eig = dense_generalized_eig(&lhs, &rhs)?;
    let vectors = q * &eig.eigenvectors;
    Ok(PencilSolution { bases, eigenvalues: eig.eigenvalues, vectors })
}

/// Per-subdomain coarse basis `Z_i = [kernel part | spectral part]` with its diagnostics.
#[derive(Clone, Debug)]
pub struct LocalCoarseSpace {
    pub z: DenseMatrix,
    pub kernel_dim: usize,
    pub n_c: usize,
    /// Pencil eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvalues[n_c - 1]`, or the largest eigenvalue when nothing is selected.
    pub tau: f64,
    /// Largest pencil eigenvalue.
    pub m_bound: f64,
}

impl LocalCoarseSpace {
    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    pub fn kernel_part(&self) -> DenseMatrix {
        cols(&self.z, 0, self.kernel_dim)
    }

    pub fn spectral_part(&self) -> DenseMatrix {
        cols(&self.z, self.kernel_dim, self.kernel_dim + self.n_c)
    }

    /// Eigenvalue `n_c + 1`, the sharp constant of the stable decomposition (0 if none).
    pub fn next_eigenvalue(&self) -> f64 {
        self.eigenvalues.get(self.n_c).copied().unwrap_or(0.0)
    }

    /// Builds a coarse space from a given kernel part and spectral part without diagnostics
    /// (imported bases); `tau` and `m_bound` are NaN.
    pub fn from_parts(kernel: &DenseMatrix, spectral: &DenseMatrix) -> Result<Self> {
        if kernel.nrows() != spectral.nrows() {
            return Err(Error::dims("coarse basis rows", kernel.nrows(), spectral.nrows()));
        }
        Ok(Self {
            z: hcat(kernel, spectral),
            kernel_dim: kernel.ncols(),
            n_c: spectral.ncols(),
            eigenvalues: Vec::new(),
            tau: f64::NAN,
            m_bound: f64::NAN,
        })
    }

    /// Copy whose spectral part is turned inside `Im(Ã)` so that its Ã-distance to the
    /// original equals `dist`: the first spectral column is rotated by `asin(dist)` towards a
    /// random unit direction that is Ã-orthogonal to the spectral span.
    pub fn rotated(&self, a_tilde: &SymSparseMatrix, dist: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&dist) {
            return Err(Error::InvalidParameter(format!("rotation distance {dist} outside [0, 1]")));
        }
        if self.n_c == 0 {
            return Err(Error::InvalidParameter("no spectral columns to rotate".into()));
        }
        let n = self.n();
        let kernel = self.kernel_part();
        let xs = self.spectral_part();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        for _ in 0..2 {
            for c in 0..kernel.ncols() {
                let k = kernel.col_as_slice(c);
                let p = dense::dot(k, &w);
                w.iter_mut().zip(k).for_each(|(x, y)| *x -= p * y);
            }
            let aw = a_tilde.matvec(&w)?;
            for c in 0..xs.ncols() {
                let x = xs.col_as_slice(c);
                let p = dense::dot(x, &aw);
                w.iter_mut().zip(x).for_each(|(a, b)| *a -= p * b);
            }
        }
        let norm = dense::dot(&w, &a_tilde.matvec(&w)?).sqrt();
        if !(norm > 0.0) {
            return Err(Error::Numerical("no Ã-orthogonal direction left to rotate into".into()));
        }
        let (s, c) = (dist, (1.0 - dist * dist).sqrt());
        let mut z = self.z.clone();
        let col = self.kernel_dim;
        for i in 0..n {
            z[(i, col)] = c * self.z[(i, col)] + s * w[i] / norm;
        }
        Ok(Self { z, ..self.clone() })
    }
}

fn cols(a: &DenseMatrix, from: usize, to: usize) -> DenseMatrix {
    DenseMatrix::from_fn(a.nrows(), to - from, |i, j| a[(i, from + j)])
}

pub(crate) fn hcat(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let ka = a.ncols();
    DenseMatrix::from_fn(a.nrows(), ka + b.ncols(), |i, j| if j < ka { a[(i, j)] } else { b[(i, j - ka)] })
}

/// Solves the local spectral problem and assembles `Z_i`.
pub fn solve_local_spectral(blocks: &LocalBlocks, selection: Selection) -> Result<LocalCoarseSpace> {
    let sol = solve_pencil(
        &blocks.dad().to_dense(),
        &blocks.a_tilde.to_dense(),
        crate::linalg::Eps::default().kernel_rel,
    )?;
    coarse_from_pencil(&sol, selection)
}

pub fn coarse_from_pencil(sol: &PencilSolution, selection: Selection) -> Result<LocalCoarseSpace> {
    let n_c = selection.count(&sol.eigenvalues)?;
    let tau = match n_c {
        0 => sol.eigenvalues.first().copied().unwrap_or(0.0),
        m => sol.eigenvalues[m - 1],
    };
    let m_bound = sol.eigenvalues.first().copied().unwrap_or(0.0);
    let spectral = cols(&sol.vectors, 0, n_c);
    Ok(LocalCoarseSpace {
        z: hcat(&sol.bases.joint_perp, &spectral),
        kernel_dim: sol.bases.joint_perp.ncols(),
        n_c,
        eigenvalues: sol.eigenvalues.clone(),
        tau,
        m_bound,
    })
}

/// Local coarse spaces of every subdomain, computed in parallel.
pub fn solve_all(blocks: &[LocalBlocks], selection: Selection) -> Result<Vec<LocalCoarseSpace>> {
    use rayon::prelude::*;
    blocks
        .par_iter()
        .map(|b| {
            solve_local_spectral(b, selection).map_err(|e| match e {
                Error::CoarseDimension { .. } => Error::Subdomain { subdomain: b.subdomain, message: e.to_string() },
                other => other,
            })
        })
        .collect()
}
