//! Independent dense reference routines for the integration tests.
//!
//! Everything here works on plain row-major `Vec<Vec<f64>>` and shares no code with the
//! library, so agreement between the two is meaningful.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rows = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn zeros(r: usize, c: usize) -> Rows {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Rows {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn transpose(a: &Rows) -> Rows {
    if a.is_empty() {
        return Vec::new();
    }
    let (r, c) = (a.len(), a[0].len());
    let mut t = zeros(c, r);
    for i in 0..r {
        for j in 0..c {
            t[j][i] = a[i][j];
        }
    }
    t
}

pub fn matmul(a: &Rows, b: &Rows) -> Rows {
    let (r, k) = (a.len(), b.len());
    let c = if k == 0 { 0 } else { b[0].len() };
    let mut out = zeros(r, c);
    for i in 0..r {
        for l in 0..k {
            let x = a[i][l];
            if x != 0.0 {
                for j in 0..c {
                    out[i][j] += x * b[l][j];
                }
            }
        }
    }
    out
}

pub fn matvec(a: &Rows, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn max_abs(a: &Rows) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Random symmetric matrix with entries uniform in [-1, 1].
pub fn random_symmetric(n: usize, rng: &mut impl Rng) -> Rows {
    let mut a = zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-1.0..1.0);
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    a
}

/// `G Gᵀ + shift·I` with a random `n × rank` factor `G`.
pub fn random_psd(n: usize, rank: usize, shift: f64, rng: &mut impl Rng) -> Rows {
    let g: Rows = (0..n)
        .map(|_| (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut a = matmul(&g, &transpose(&g));
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += shift;
    }
    a
}

/// Cyclic Jacobi rotations; returns eigenvalues ascending and eigenvectors as columns.
pub fn jacobi_eigen(a: &Rows) -> (Vec<f64>, Rows) {
    let n = a.len();
    let mut m = a.clone();
    let mut v = eye(n);
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[x][x].partial_cmp(&m[y][y]).unwrap());
    let vals = order.iter().map(|&k| m[k][k]).collect();
    let vecs = (0..n).map(|i| order.iter().map(|&k| v[i][k]).collect()).collect();
    (vals, vecs)
}

/// Lower Cholesky factor, `None` if not positive definite.
pub fn cholesky(a: &Rows) -> Option<Rows> {
    let n = a.len();
    let mut l = zeros(n, n);
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d <= 0.0 {
            return None;
        }
        l[j][j] = d.sqrt();
        for i in (j + 1)..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / l[j][j];
        }
    }
    Some(l)
}

/// Inverse of a lower triangular matrix by forward substitution.
pub fn lower_inverse(l: &Rows) -> Rows {
    let n = l.len();
    let mut inv = zeros(n, n);
    for c in 0..n {
        for i in 0..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i][k] * inv[k][c];
            }
            inv[i][c] = s / l[i][i];
        }
    }
    inv
}

/// Generalized eigenvalues of `(A, B)`, `B` SPD, ascending.
pub fn generalized_eigenvalues(a: &Rows, b: &Rows) -> Vec<f64> {
    let li = lower_inverse(&cholesky(b).expect("B must be SPD"));
    let c = matmul(&matmul(&li, a), &transpose(&li));
    let c = symmetrize(&c);
    jacobi_eigen(&c).0
}

pub fn symmetrize(a: &Rows) -> Rows {
    let n = a.len();
    let mut s = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    s
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &Rows, b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Rows = a.iter().zip(b).map(|(row, &bi)| {
        let mut r = row.clone();
        r.push(bi);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        assert!(p != 0.0, "singular system");
        for r in (col + 1)..n {
            let f = m[r][col] / p;
            if f != 0.0 {
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = m[i][n];
        for j in (i + 1)..n {
            s -= m[i][j] * x[j];
        }
        x[i] = s / m[i][i];
    }
    x
}

/// Eigenvalues of the pencil `(A, B)` restricted to `Im(B)` for symmetric PSD `B`: the image
/// is found by Jacobi, both matrices are compressed onto it and `B` is whitened there.
/// Returns ascending eigenvalues and the kernel dimension of `B`.
pub fn deflated_pencil_eigenvalues(a: &Rows, b: &Rows, rel_tol: f64) -> (Vec<f64>, usize) {
    let n = b.len();
    let (vals, vecs) = jacobi_eigen(b);
    let lmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let image: Vec<usize> = (0..n).filter(|&k| vals[k] > rel_tol * lmax).collect();
    let r = image.len();
    // W = Q Λ^{-1/2}: columns span Im(B) and whiten it.
    let mut w = zeros(n, r);
    for (c, &k) in image.iter().enumerate() {
        let s = 1.0 / vals[k].sqrt();
        for i in 0..n {
            w[i][c] = vecs[i][k] * s;
        }
    }
    let c = symmetrize(&matmul(&transpose(&w), &matmul(a, &w)));
    (jacobi_eigen(&c).0, n - r)
}

/// Dense rows of a sparse-like specification `(i, j, v)`, upper triangle mirrored.
pub fn dense_from_upper(n: usize, entries: &[(usize, usize, f64)]) -> Rows {
    let mut a = zeros(n, n);
    for &(i, j, v) in entries {
        a[i][j] += v;
        if i != j {
            a[j][i] += v;
        }
    }
    a
}

/// Random sparse symmetric upper-triangle entries with the given density plus a diagonal.
pub fn random_sparse_upper(n: usize, density: f64, rng: &mut impl Rng) -> Vec<(usize, usize, f64)> {
    let mut e = Vec::new();
    for i in 0..n {
        e.push((i, i, rng.random_range(1.0..2.0)));
        for j in (i + 1)..n {
            if rng.random_bool(density) {
                e.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    e
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn gauss_inverse(a: &Rows) -> Rows {
    let n = a.len();
    let mut m: Rows = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| (i == j) as u8 as f64));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        assert!(p != 0.0, "singular matrix");
        for c in 0..2 * n {
            m[col][c] /= p;
        }
        let pivot_row = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != col && row[col] != 0.0 {
                let f = row[col];
                for c in 0..2 * n {
                    row[c] -= f * pivot_row[c];
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}
