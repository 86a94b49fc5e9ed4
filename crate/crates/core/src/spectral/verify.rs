use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{kernel_bases, LocalBlocks, LocalCoarseSpace};
use crate::error::{Error, Result};
use crate::linalg::{dense, DenseMatrix};

/// Outcome of a randomized check of `(u − Πu)ᵀ DAD (u − Πu) ≤ τ uᵀÃu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub trials: usize,
    pub tau: f64,
    /// Eigenvalue `n_c + 1`, the smallest admissible constant.
    pub sharp: f64,
    /// Max ratio on the full space with `Π` orthogonal in the `Ã + P_ker` inner product.
    pub max_ratio: f64,
    /// Max ratio on the image projections of the same draws with the Ã-orthogonal projector.
    pub max_ratio_image: f64,
    /// Max ratio with the Euclidean projector onto `span(Z)`, for comparison only.
    pub max_ratio_euclidean: f64,
    /// Draws with `max_ratio > τ (1 + 1e-8)`.
    pub violations: usize,
}

impl StabilityReport {
    /// Relative gap between the full-space and image-restricted maxima.
    pub fn equivalence_gap(&self) -> f64 {
        (self.max_ratio - self.max_ratio_image).abs() / self.max_ratio.abs().max(f64::MIN_POSITIVE)
    }
}

/// Evaluates the three ratios for given vectors; `None` where `uᵀÃu` vanishes.
pub struct StabilityProbe {
    dad: DenseMatrix,
    a_tilde: DenseMatrix,
    image: DenseMatrix,
    kernel_part: DenseMatrix,
    spectral: DenseMatrix,
    span: DenseMatrix,
    a_norm: f64,
}

impl StabilityProbe {
    pub fn new(blocks: &LocalBlocks, coarse: &LocalCoarseSpace) -> Result<Self> {
        if coarse.n() != blocks.n() {
            return Err(Error::dims("coarse basis rows", blocks.n(), coarse.n()));
        }
        let bases = kernel_bases(blocks)?;
        let a_tilde = blocks.a_tilde.to_dense();
        Ok(Self {
            dad: blocks.dad().to_dense(),
            a_norm: blocks.a_tilde.norm_inf(),
            a_tilde,
            image: bases.image,
            kernel_part: coarse.kernel_part(),
            spectral: coarse.spectral_part(),
            span: dense::orthonormal_columns(&coarse.z),
        })
    }

    fn energy(&self, m: &DenseMatrix, x: &[f64]) -> f64 {
        let col = DenseMatrix::from_fn(x.len(), 1, |i, _| x[i]);
        let y = m * &col;
        dense::dot(x, y.col_as_slice(0))
    }

    fn minus_projection(x: &[f64], basis: &DenseMatrix, weights: &[f64]) -> Vec<f64> {
        let mut r = x.to_vec();
        for c in 0..basis.ncols() {
            let b = basis.col_as_slice(c);
            let p = weights[c];
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= p * bi);
        }
        r
    }

    fn coeffs(basis: &DenseMatrix, x: &[f64]) -> Vec<f64> {
        (0..basis.ncols()).map(|c| dense::dot(basis.col_as_slice(c), x)).collect()
    }

    /// `(full, image, euclidean)` ratios for `u`.
    pub fn ratios(&self, u: &[f64]) -> Option<(f64, f64, f64)> {
        let denom = self.energy(&self.a_tilde, u);
        let nu = dense::dot(u, u);
        if !(denom > 1e-14 * self.a_norm * nu) {
            return None;
        }
        let au = {
            let col = DenseMatrix::from_fn(u.len(), 1, |i, _| u[i]);
            (&self.a_tilde * &col).col_as_slice(0).to_vec()
        };
        let r = Self::minus_projection(u, &self.kernel_part, &Self::coeffs(&self.kernel_part, u));
        let r = Self::minus_projection(&r, &self.spectral, &Self::coeffs(&self.spectral, &au));
        let full = self.energy(&self.dad, &r) / denom;

        let v: Vec<f64> = {
            let c = Self::coeffs(&self.image, u);
            let mut v = vec![0.0; u.len()];
            for (k, ck) in c.iter().enumerate() {
                v.iter_mut().zip(self.image.col_as_slice(k)).for_each(|(vi, qi)| *vi += ck * qi);
            }
            v
        };
        let av = {
            let col = DenseMatrix::from_fn(v.len(), 1, |i, _| v[i]);
            (&self.a_tilde * &col).col_as_slice(0).to_vec()
        };
        let rv = Self::minus_projection(&v, &self.spectral, &Self::coeffs(&self.spectral, &av));
        let image = self.energy(&self.dad, &rv) / self.energy(&self.a_tilde, &v);

        let re = Self::minus_projection(u, &self.span, &Self::coeffs(&self.span, u));
        let euclid = self.energy(&self.dad, &re) / denom;
        Some((full, image, euclid))
    }
}

/// Checks the stable-decomposition inequality on `trials` standard normal draws.
pub fn verify_stable_decomposition(
    blocks: &LocalBlocks,
    coarse: &LocalCoarseSpace,
    trials: usize,
    seed: u64,
) -> Result<StabilityReport> {
    let probe = StabilityProbe::new(blocks, coarse)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = StabilityReport {
        trials,
        tau: coarse.tau,
        sharp: coarse.next_eigenvalue(),
        max_ratio: 0.0,
        max_ratio_image: 0.0,
        max_ratio_euclidean: 0.0,
        violations: 0,
    };
    for _ in 0..trials {
        let u: Vec<f64> = (0..blocks.n()).map(|_| StandardNormal.sample(&mut rng)).collect();
        if let Some((full, image, euclid)) = probe.ratios(&u) {
            rep.max_ratio = rep.max_ratio.max(full);
            rep.max_ratio_image = rep.max_ratio_image.max(image);
            rep.max_ratio_euclidean = rep.max_ratio_euclidean.max(euclid);
            if full > coarse.tau * (1.0 + 1e-8) {
                rep.violations += 1;
            }
        }
    }
    Ok(rep)
}
