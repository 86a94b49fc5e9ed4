//! Little-endian binary formats SGB1 (subdomain graph record) and CBX1 (coarse basis).
//!
//! ```text
//! SGB1: "SGB1" | u64 n | u64 nnz | u64 n_feat = 3 | u8 has_target | [u64 n_c]
//!       | u64[nnz] rows | u64[nnz] cols | f64[nnz] values      (upper triangle, row-major)
//!       | f64[3n] features (node-major: type_flag, d_v, s_v) | [f64[n·n_c] basis, column-major]
//! CBX1: "CBX1" | u64 n | u64 n_c | f64[n·n_c] column-major
//! ```

use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::linalg::{DenseMatrix, SymSparseMatrix};
use crate::spectral::LocalBlocks;

pub const SGB_MAGIC: &[u8; 4] = b"SGB1";
pub const CBX_MAGIC: &[u8; 4] = b"CBX1";
const N_FEAT: u64 = 3;

/// One subdomain as exchanged with a surrogate model.
#[derive(Clone, Debug, PartialEq)]
pub struct SubdomainGraphRecord {
    pub matrix: SymSparseMatrix,
    /// Per node `[type_flag, d_v, s_v]`: halo flag, multiplicity and exterior coupling.
    pub features: Vec<[f64; 3]>,
    pub target: Option<DenseMatrix>,
}

impl SubdomainGraphRecord {
    pub fn from_blocks(blocks: &LocalBlocks, target: Option<DenseMatrix>) -> Result<Self> {
        let features = (0..blocks.n())
            .map(|p| [blocks.halo[p] as u8 as f64, blocks.multiplicity[p] as f64, blocks.s[p]])
            .collect();
        let rec = Self { matrix: blocks.a_local.clone(), features, target };
        rec.validate()?;
        Ok(rec)
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    /// Halo flags are 0 or 1, `s_v = 0` off the halo and `d_v` is a positive integer.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.features.len() != n {
            return Err(Error::dims("record features", n, self.features.len()));
        }
        for (v, &[flag, d, s]) in self.features.iter().enumerate() {
            if flag != 0.0 && flag != 1.0 {
                return Err(Error::InvalidParameter(format!("node {v}: type flag {flag} is not 0 or 1")));
            }
            if flag == 0.0 && s != 0.0 {
                return Err(Error::InvalidParameter(format!("node {v}: interior node with s_v = {s}")));
            }
            if !(d >= 1.0) || d.fract() != 0.0 {
                return Err(Error::InvalidParameter(format!("node {v}: multiplicity {d} is not a positive integer")));
            }
        }
        if let Some(t) = &self.target {
            if t.nrows() != n {
                return Err(Error::dims("record target rows", n, t.nrows()));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.n();
        let entries: Vec<(usize, usize, f64)> = self.matrix.upper_entries().collect();
        let mut out = Vec::with_capacity(41 + entries.len() * 24 + n * 24);
        out.extend_from_slice(SGB_MAGIC);
        put_u64(&mut out, n as u64);
        put_u64(&mut out, entries.len() as u64);
        put_u64(&mut out, N_FEAT);
        out.push(self.target.is_some() as u8);
        if let Some(t) = &self.target {
            put_u64(&mut out, t.ncols() as u64);
        }
        for &(i, _, _) in &entries {
            put_u64(&mut out, i as u64);
        }
        for &(_, j, _) in &entries {
            put_u64(&mut out, j as u64);
        }
        for &(_, _, v) in &entries {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for f in &self.features {
            for v in f {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        if let Some(t) = &self.target {
            put_matrix(&mut out, t);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(SGB_MAGIC)?;
        let n = r.len_u64("n")?;
        let nnz = r.len_u64("nnz")?;
        let feat_at = r.pos;
        let n_feat = r.u64()?;
        if n_feat != N_FEAT {
            return Err(Error::Parse { offset: feat_at as u64, message: format!("n_feat = {n_feat}, expected 3") });
        }
        let flag_at = r.pos;
        let has_target = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::Parse { offset: flag_at as u64, message: format!("has_target byte {b}") }),
        };
        let n_c = if has_target { Some(r.len_u64("n_c")?) } else { None };
        r.need(nnz.checked_mul(24).ok_or_else(|| r.err("nnz overflows"))?)?;
        let rows_at = r.pos;
        let rows: Vec<u64> = (0..nnz).map(|_| r.u64()).collect::<Result<_>>()?;
        let cols: Vec<u64> = (0..nnz).map(|_| r.u64()).collect::<Result<_>>()?;
        let vals_at = r.pos;
        let vals = r.f64s(nnz)?;
        let mut entries = Vec::with_capacity(nnz);
        let mut prev: Option<(u64, u64)> = None;
        for k in 0..nnz {
            let (i, j) = (rows[k], cols[k]);
            if i > j || j >= n as u64 || prev.is_some_and(|p| p >= (i, j)) {
                return Err(Error::Parse {
                    offset: (rows_at + 8 * k) as u64,
                    message: format!("entry {k} ({i}, {j}) is not a sorted upper-triangle index"),
                });
            }
            prev = Some((i, j));
            entries.push((i as usize, j as usize, vals[k]));
        }
        let feat_start = r.pos;
        let raw = r.f64s(3 * n)?;
        let features = raw.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let target = match n_c {
            Some(m) => Some(r.matrix(n, m)?),
            None => None,
        };
        r.finish()?;
        let matrix = SymSparseMatrix::from_upper_triplets(n, entries).map_err(|e| Error::Parse {
            offset: vals_at as u64,
            message: e.to_string(),
        })?;
        let rec = Self { matrix, features, target };
        rec.validate().map_err(|e| Error::Parse { offset: feat_start as u64, message: e.to_string() })?;
        Ok(rec)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

pub fn cbx_to_bytes(basis: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * basis.nrows() * basis.ncols());
    out.extend_from_slice(CBX_MAGIC);
    put_u64(&mut out, basis.nrows() as u64);
    put_u64(&mut out, basis.ncols() as u64);
    put_matrix(&mut out, basis);
    out
}

pub fn cbx_from_bytes(bytes: &[u8]) -> Result<DenseMatrix> {
    let mut r = Reader::new(bytes);
    r.magic(CBX_MAGIC)?;
    // an n × 0 basis has no payload, so n alone is not bounded by the file size
    let n = r.len_u64_max("n", u32::MAX as usize)?;
    let m = r.len_u64("n_c")?;
    let basis = r.matrix(n, m)?;
    r.finish()?;
    Ok(basis)
}

pub fn write_cbx(path: &Path, basis: &DenseMatrix) -> Result<()> {
    if let Some((i, j)) = first_non_finite(basis) {
        return Err(Error::InvalidParameter(format!("basis entry ({i}, {j}) is not finite")));
    }
    write_atomic(path, &cbx_to_bytes(basis))
}

pub fn read_cbx(path: &Path) -> Result<DenseMatrix> {
    cbx_from_bytes(&std::fs::read(path)?)
}

fn first_non_finite(m: &DenseMatrix) -> Option<(usize, usize)> {
    (0..m.ncols()).flat_map(|j| (0..m.nrows()).map(move |i| (i, j))).find(|&(i, j)| !m[(i, j)].is_finite())
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_matrix(out: &mut Vec<u8>, m: &DenseMatrix) {
    for j in 0..m.ncols() {
        for v in m.col_as_slice(j) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { offset: self.pos as u64, message: message.into() }
    }

    fn need(&self, k: usize) -> Result<()> {
        if self.bytes.len() - self.pos < k {
            return Err(self.err(format!("truncated: need {k} bytes, {} left", self.bytes.len() - self.pos)));
        }
        Ok(())
    }

    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        self.need(k)?;
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn magic(&mut self, m: &[u8; 4]) -> Result<()> {
        if self.bytes.len() < 4 || &self.bytes[..4] != m {
            return Err(self.err(format!("bad magic, expected {:?}", std::str::from_utf8(m).unwrap())));
        }
        self.pos = 4;
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A u64 element count no larger than the file.
    fn len_u64(&mut self, what: &str) -> Result<usize> {
        self.len_u64_max(what, self.bytes.len())
    }

    fn len_u64_max(&mut self, what: &str, limit: usize) -> Result<usize> {
        let at = self.pos;
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&v| v <= limit)
            .ok_or(Error::Parse { offset: at as u64, message: format!("{what} = {v} exceeds the file size") })
    }

    fn f64s(&mut self, k: usize) -> Result<Vec<f64>> {
        self.need(k.checked_mul(8).ok_or_else(|| self.err("length overflows"))?)?;
        let mut out = Vec::with_capacity(k);
        for idx in 0..k {
            let at = self.pos;
            let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
            if v.is_nan() {
                return Err(Error::Parse { offset: at as u64, message: format!("NaN at value index {idx}") });
            }
            out.push(v);
        }
        Ok(out)
    }

    fn matrix(&mut self, n: usize, m: usize) -> Result<DenseMatrix> {
        let count = n.checked_mul(m).ok_or_else(|| self.err("matrix size overflows"))?;
        let data = self.f64s(count)?;
        Ok(Mat::from_fn(n, m, |i, j| data[j * n + i]))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.err(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}
