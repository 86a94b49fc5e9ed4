use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::Grid;
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, DenseMatrix};

/// Largest grid the dense Karhunen-Loeve fallback accepts.
pub const KL_MAX_CELLS: usize = 8192;
/// Number of leading modes kept by the Karhunen-Loeve fallback.
pub const KL_MODES: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrfMethod {
    /// Circulant embedding, falling back to Karhunen-Loeve when the embedding is indefinite.
    Auto,
    Circulant,
    KarhunenLoeve,
}

/// How a field was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Provenance {
    Constant {
        value: f64,
    },
    Lognormal {
        sigma2: f64,
        corr_lengths: Vec<f64>,
        seed: u64,
        method: GrfMethod,
    },
    Channels {
        n_range: (usize, usize),
        len_range: (f64, f64),
        width_range: (f64, f64),
        kappa_c: f64,
        seed: u64,
        count: usize,
    },
}

impl Provenance {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Provenance::Constant { .. } => None,
            Provenance::Lognormal { seed, .. } | Provenance::Channels { seed, .. } => Some(*seed),
        }
    }
}

/// Scalar permeability per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermeabilityField {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl PermeabilityField {
    pub fn new(values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "permeability must be positive and finite, cell {i} has {v}"
            )));
        }
        Ok(Self { values, provenance })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiplies every value by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * c).collect(), self.provenance.clone())
    }

    /// Flat little-endian raster preceded by a one-line JSON header.
    pub fn to_raster_bytes(&self, grid: &Grid) -> Result<Vec<u8>> {
        let header = serde_json::json!({
            "dims": grid.dims(),
            "seed": self.provenance.seed(),
            "provenance": self.provenance,
        });
        let mut out = serde_json::to_vec(&header)?;
        out.push(b'\n');
        out.extend(crate::io::f64s_le(&self.values));
        Ok(out)
    }

    pub fn write_raster(&self, grid: &Grid, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_raster_bytes(grid)?)
    }

    /// Parses the raster format written by [`PermeabilityField::to_raster_bytes`].
    pub fn from_raster_bytes(bytes: &[u8]) -> Result<(Grid, Self)> {
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or(Error::Parse {
            offset: 0,
            message: "missing header line".into(),
        })?;
        #[derive(Deserialize)]
        struct Header {
            dims: Vec<usize>,
            provenance: Provenance,
        }
        let h: Header = serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::Parse {
            offset: 0,
            message: format!("bad header: {e}"),
        })?;
        let grid = Grid::new(&h.dims)?;
        let body = &bytes[nl + 1..];
        let n = grid.n_cells();
        if body.len() != 8 * n {
            return Err(Error::Parse {
                offset: (nl + 1 + body.len().min(8 * n)) as u64,
                message: format!("expected {} payload bytes, found {}", 8 * n, body.len()),
            });
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((grid, Self::new(values, h.provenance)?))
    }
}

pub fn gen_constant(grid: &Grid, value: f64) -> Result<PermeabilityField> {
    PermeabilityField::new(vec![value; grid.n_cells()], Provenance::Constant { value })
}

/// Log-normal field `κ = exp(Z)` with `Cov Z(x, y) = σ² exp(-|(x - y) / η|)` (anisotropic).
pub fn gen_lognormal(grid: &Grid, sigma2: f64, corr_lengths: &[f64], seed: u64) -> Result<PermeabilityField> {
    gen_lognormal_with(grid, sigma2, corr_lengths, seed, GrfMethod::Auto)
}

pub fn gen_lognormal_with(
    grid: &Grid,
    sigma2: f64,
    corr_lengths: &[f64],
    seed: u64,
    method: GrfMethod,
) -> Result<PermeabilityField> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    if corr_lengths.len() != grid.dim() {
        return Err(Error::dims("correlation lengths", grid.dim(), corr_lengths.len()));
    }
    if corr_lengths.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter("correlation lengths must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cov = |d: &[f64]| {
        let r2: f64 = d.iter().zip(corr_lengths).map(|(x, e)| (x / e) * (x / e)).sum();
        sigma2 * (-r2.sqrt()).exp()
    };
    let (z, used) = match method {
        GrfMethod::KarhunenLoeve => (karhunen_loeve(grid, &cov, &mut rng)?, GrfMethod::KarhunenLoeve),
        GrfMethod::Circulant => match circulant_embedding(grid, &cov, &mut rng) {
            Some(z) => (z, GrfMethod::Circulant),
            None => {
                return Err(Error::Numerical(
                    "circulant embedding is not positive semidefinite".into(),
                ))
            }
        },
        GrfMethod::Auto => match circulant_embedding(grid, &cov, &mut rng) {
            Some(z) => (z, GrfMethod::Circulant),
            None => {
                log::warn!("circulant embedding indefinite, using Karhunen-Loeve truncation");
                (karhunen_loeve(grid, &cov, &mut rng)?, GrfMethod::KarhunenLoeve)
            }
        },
    };
    PermeabilityField::new(
        z.into_iter().map(f64::exp).collect(),
        Provenance::Lognormal {
            sigma2,
            corr_lengths: corr_lengths.to_vec(),
            seed,
            method: used,
        },
    )
}

fn fft_nd(data: &mut [Complex<f64>], dims: &[usize], planner: &mut FftPlanner<f64>) {
    let total: usize = dims.iter().product();
    let mut stride = 1;
    let mut line = Vec::new();
    for &m in dims {
        let fft = planner.plan_fft_forward(m);
        line.resize(m, Complex::new(0.0, 0.0));
        let block = stride * m;
        for base in (0..total).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for (k, c) in line.iter_mut().enumerate() {
                    *c = data[start + k * stride];
                }
                fft.process(&mut line);
                for (k, c) in line.iter().enumerate() {
                    data[start + k * stride] = *c;
                }
            }
        }
        stride = block;
    }
}

/// Samples on the grid via a periodic embedding of size `2·n` (or `4·n`) per axis; `None` if
/// the embedding has significantly negative eigenvalues.
fn circulant_embedding(grid: &Grid, cov: &dyn Fn(&[f64]) -> f64, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let d = grid.dim();
    let mut planner = FftPlanner::new();
    for factor in [2usize, 4] {
        let m: Vec<usize> = grid.dims().iter().map(|&n| factor * n).collect();
        let total: usize = m.iter().product();
        let mut c = vec![Complex::new(0.0, 0.0); total];
        let mut lag = vec![0.0; d];
        for (idx, slot) in c.iter_mut().enumerate() {
            let mut rem = idx;
            for a in 0..d {
                let i = rem % m[a];
                rem /= m[a];
                lag[a] = i.min(m[a] - i) as f64 * grid.h(a);
            }
            *slot = Complex::new(cov(&lag), 0.0);
        }
        fft_nd(&mut c, &m, &mut planner);
        let lmax = c.iter().fold(0.0f64, |x, v| x.max(v.re));
        let lmin = c.iter().fold(f64::INFINITY, |x, v| x.min(v.re));
        if lmin < -1e-8 * lmax {
            continue;
        }
        let mut w: Vec<Complex<f64>> = c
            .iter()
            .map(|l| {
                let s = (l.re.max(0.0) / total as f64).sqrt();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        fft_nd(&mut w, &m, &mut planner);
        let n = grid.n_cells();
        let mut z = Vec::with_capacity(n);
        for cell in 0..n {
            let ijk = grid.coords(cell);
            let mut idx = 0;
            for a in (0..d).rev() {
                idx = idx * m[a] + ijk[a];
            }
            z.push(w[idx].re);
        }
        return Some(z);
    }
    None
}

fn karhunen_loeve(grid: &Grid, cov: &dyn Fn(&[f64]) -> f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let n = grid.n_cells();
    if n > KL_MAX_CELLS {
        return Err(Error::DenseCapExceeded { n, cap: KL_MAX_CELLS });
    }
    let d = grid.dim();
    let centers: Vec<[f64; 3]> = (0..n).map(|c| grid.center(c)).collect();
    let c = DenseMatrix::from_fn(n, n, |i, j| {
        let lag: Vec<f64> = (0..d).map(|a| centers[i][a] - centers[j][a]).collect();
        cov(&lag)
    });
    let eig = symmetric_eigen(&c)?;
    let modes = KL_MODES.min(n);
    let mut z = vec![0.0; n];
    for k in 0..modes {
        let lam = eig.eigenvalues[k].max(0.0);
        let xi: f64 = rng.sample(StandardNormal);
        let s = lam.sqrt() * xi;
        let col = eig.eigenvectors.col_as_slice(k);
        for (zi, v) in z.iter_mut().zip(col) {
            *zi += s * v;
        }
    }
    Ok(z)
}

/// Straight channel in grid units, with cell `(i, j[, k])` centered at `(i + ½, j + ½[, k + ½])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub start: [f64; 3],
    pub end: [f64; 3],
    /// Full width in 2D, tube radius in 3D.
    pub width: f64,
}

/// Sampling ranges for [`gen_channels`]. Lengths and widths are in grid cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub n_range: (usize, usize),
    pub len_range: (f64, f64),
    pub width_range: (f64, f64),
    pub kappa_c: f64,
}

impl ChannelParams {
    /// Defaults scaled to the grid: lengths in `[0.15, 0.5]·nx`, 8 to 20 channels of width 3
    /// to 8 in 2D, 6 to 15 tubes of radius 2 to 5 in 3D.
    pub fn scaled_default(grid: &Grid, kappa_c: f64) -> Self {
        let nx = grid.dims()[0] as f64;
        let len_range = (0.15 * nx, 0.5 * nx);
        if grid.dim() == 2 {
            Self { n_range: (8, 20), len_range, width_range: (3.0, 8.0), kappa_c }
        } else {
            Self { n_range: (6, 15), len_range, width_range: (2.0, 5.0), kappa_c }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.n_range.0 <= self.n_range.1
            && self.len_range.0 >= 0.0
            && self.len_range.0 <= self.len_range.1
            && self.width_range.0 > 0.0
            && self.width_range.0 <= self.width_range.1
            && self.kappa_c > 0.0
            && self.kappa_c.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid channel parameters {self:?}")))
        }
    }

    pub fn sample(&self, grid: &Grid, rng: &mut impl Rng) -> Vec<Channel> {
        let d = grid.dim();
        let count = rng.random_range(self.n_range.0..=self.n_range.1);
        (0..count)
            .map(|_| {
                let mut start = [0.0; 3];
                for a in 0..d {
                    start[a] = rng.random_range(0.0..grid.dims()[a] as f64);
                }
                let len = uniform(rng, self.len_range);
                let width = uniform(rng, self.width_range);
                let mut dir = [0.0; 3];
                loop {
                    for v in dir.iter_mut().take(d) {
                        *v = rng.sample::<f64, _>(StandardNormal);
                    }
                    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        dir.iter_mut().for_each(|v| *v /= norm);
                        break;
                    }
                }
                let mut end = [0.0; 3];
                for a in 0..d {
                    end[a] = start[a] + len * dir[a];
                }
                Channel { start, end, width }
            })
            .collect()
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Channelized field: background 1, `kappa_c` inside randomly sampled channels.
pub fn gen_channels(grid: &Grid, params: &ChannelParams, seed: u64) -> Result<PermeabilityField> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = params.sample(grid, &mut rng);
    let values = rasterize_channels(grid, &channels, params.kappa_c);
    PermeabilityField::new(
        values,
        Provenance::Channels {
            n_range: params.n_range,
            len_range: params.len_range,
            width_range: params.width_range,
            kappa_c: params.kappa_c,
            seed,
            count: channels.len(),
        },
    )
}

/// Cells whose center lies within half the width (2D) or the radius (3D) of a channel's
/// segment get `kappa_c`, all others 1.
pub fn rasterize_channels(grid: &Grid, channels: &[Channel], kappa_c: f64) -> Vec<f64> {
    let d = grid.dim();
    let mut values = vec![1.0; grid.n_cells()];
    for ch in channels {
        let reach = if d == 2 { 0.5 * ch.width } else { ch.width };
        let mut lo = [0usize; 3];
        let mut hi = [1usize; 3];
        for a in 0..d {
            let mn = ch.start[a].min(ch.end[a]) - reach - 1.0;
            let mx = ch.start[a].max(ch.end[a]) + reach + 1.0;
            lo[a] = mn.floor().max(0.0) as usize;
            hi[a] = (mx.ceil().max(0.0) as usize).min(grid.dims()[a]);
        }
        for k in lo[2]..hi[2] {
            for j in lo[1]..hi[1] {
                for i in lo[0]..hi[0] {
                    let p = [i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5];
                    if segment_distance(&p, ch, d) <= reach {
                        values[grid.index([i, j, k])] = kappa_c;
                    }
                }
            }
        }
    }
    values
}

fn segment_distance(p: &[f64; 3], ch: &Channel, d: usize) -> f64 {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for a in 0..d {
        let ab = ch.end[a] - ch.start[a];
        ab2 += ab * ab;
        ap_ab += (p[a] - ch.start[a]) * ab;
    }
    let t = if ab2 > 0.0 { (ap_ab / ab2).clamp(0.0, 1.0) } else { 0.0 };
    let mut dist2 = 0.0;
    for a in 0..d {
        let q = ch.start[a] + t * (ch.end[a] - ch.start[a]);
        dist2 += (p[a] - q) * (p[a] - q);
    }
    dist2.sqrt()
}
