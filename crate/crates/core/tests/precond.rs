mod support;

use faer::Mat;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use schwarz_core::darcy::*;
use schwarz_core::decomp::*;
use schwarz_core::krylov::{lemma_bound, pcg};
use schwarz_core::linalg::{DenseMatrix, SymSparseMatrix};
use schwarz_core::precond::*;
use schwarz_core::spectral::*;
use support::*;

fn system(nx: usize, kappa_c: f64, seed: u64) -> LinearSystem {
    let g = Grid::new_2d(nx, nx).unwrap();
    let k = if kappa_c == 1.0 {
        gen_constant(&g, 1.0).unwrap()
    } else {
        gen_channels(&g, &ChannelParams::scaled_default(&g, kappa_c), seed).unwrap()
    };
    assemble_tpfa(&g, &k, &BoundaryConfig::c1(), None).unwrap()
}

fn decomposition(sys: &LinearSystem, k: usize, delta: usize) -> Decomposition {
    let coords: Vec<[f64; 3]> = (0..sys.grid.n_cells()).map(|c| sys.grid.center(c)).collect();
    decompose(&adjacency_graph(&sys.a), Some(&coords), k, delta, 0).unwrap()
}

fn setup(nx: usize, k: usize, delta: usize, n_c: usize, kappa_c: f64) -> (LinearSystem, Decomposition, Vec<LocalCoarseSpace>) {
    let sys = system(nx, kappa_c, 5);
    let d = decomposition(&sys, k, delta);
    let blocks = build_all_blocks(&sys.a, &d).unwrap();
    let cs = solve_all(&blocks, Selection::fixed(n_c)).unwrap();
    (sys, d, cs)
}

fn rows_of(a: &DenseMatrix) -> Rows {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

fn random_vec(n: usize, r: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(r)).collect()
}

/// Independent dense `M⁻¹ = Σ R_iᵀ A_i⁻¹ R_i + E (EᵀAE)⁻¹ Eᵀ` with `E = [R_iᵀ D_i Z_i]`.
fn oracle_inverse(a: &SymSparseMatrix, d: &Decomposition, cs: Option<&[LocalCoarseSpace]>) -> (Rows, Rows) {
    let n = a.n();
    let ad = rows_of(&a.to_dense());
    let mut m = zeros(n, n);
    let mut e_cols: Vec<Vec<f64>> = Vec::new();
    for i in 0..d.k() {
        let idx = d.overlapping(i);
        let ai: Rows = idx.iter().map(|&p| idx.iter().map(|&q| ad[p][q]).collect()).collect();
        let inv = gauss_inverse(&ai);
        for (p, &gp) in idx.iter().enumerate() {
            for (q, &gq) in idx.iter().enumerate() {
                m[gp][gq] += inv[p][q];
            }
        }
        if let Some(cs) = cs {
            let mult = d.multiplicity();
            for c in 0..cs[i].dim() {
                let mut col = vec![0.0; n];
                for (p, &g) in idx.iter().enumerate() {
                    col[g] = cs[i].z[(p, c)] / mult[g] as f64;
                }
                e_cols.push(col);
            }
        }
    }
    let e: Rows = (0..n).map(|g| e_cols.iter().map(|c| c[g]).collect()).collect();
    let a0 = if e_cols.is_empty() { Vec::new() } else { symmetrize(&matmul(&transpose(&e), &matmul(&ad, &e))) };
    if !e_cols.is_empty() {
        let c = matmul(&e, &matmul(&gauss_inverse(&a0), &transpose(&e)));
        for i in 0..n {
            for j in 0..n {
                m[i][j] += c[i][j];
            }
        }
    }
    (m, a0)
}

#[test]
fn single_subdomain_without_coarse_space_is_exact() {
    let sys = system(10, 1e3, 1);
    let d = decomposition(&sys, 1, 0);
    let m = TwoLevelPreconditioner::assemble(&sys.a, &d, None, Level1Variant::SymmetricAs).unwrap();
    assert_eq!(m.coarse_dim(), 0);
    let mut r = rng(2);
    let b = random_vec(100, &mut r);
    let z = m.apply(&b).unwrap();
    let x = gauss_solve(&rows_of(&sys.a.to_dense()), &b);
    let err = z.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-10 * x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let (_, rep) = pcg(&sys.a, &m, &sys.b, 1e-8, 50).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.iterations, 1);
}

#[test]
fn zero_residual_maps_to_zero() {
    let (sys, d, cs) = setup(16, 4, 1, 4, 1e3);
    let m = TwoLevelPreconditioner::assemble(&sys.a, &d, Some(&cs), Level1Variant::SymmetricAs).unwrap();
    assert!(m.apply(&vec![0.0; 256]).unwrap().iter().all(|&v| v == 0.0));
    assert!(m.apply(&[1.0; 3]).is_err());
}

#[test]
fn duplicated_coarse_column_is_dropped_once() {
    let (sys, d, mut cs) = setup(16, 4, 1, 4, 1e3);
    let z = &cs[2].z;
    let dup = Mat::from_fn(z.nrows(), z.ncols() + 1, |i, j| z[(i, j.min(z.ncols() - 1))]);
    let offered: usize = cs.iter().map(|c| c.dim()).sum::<usize>() + 1;
    cs[2].z = dup;
    let m = TwoLevelPreconditioner::assemble(&sys.a, &d, Some(&cs), Level1Variant::SymmetricAs).unwrap();
    let info = m.coarse_info();
    assert_eq!(info.dropped, 1);
    assert_eq!(info.dim, offered - 1);
    assert!(!info.shifted);
}

#[test]
fn coarse_matrix_and_apply_match_dense_oracle() {
    let (sys, d, cs) = setup(16, 4, 1, 4, 1e3);
    let m = TwoLevelPreconditioner::assemble(&sys.a, &d, Some(&cs), Level1Variant::SymmetricAs).unwrap();
    let info = m.coarse_info();
    let expected: usize = cs.iter().map(|c| c.kernel_dim + 4).sum();
    assert_eq!(info.dim + info.dropped, expected);
    assert_eq!(info.dropped, 0);
    let (oracle, a0_oracle) = oracle_inverse(&sys.a, &d, Some(&cs));
    // A₀ in normalized columns equals the oracle's A₀ congruent by the column scaling
    let e = m.coarse_basis();
    let mult = d.multiplicity();
    let mut col = 0;
    let mut scale = Vec::new();
    for i in 0..d.k() {
        for c in 0..cs[i].dim() {
            let norm2: f64 = d.overlapping(i).iter().enumerate().map(|(p, &g)| (cs[i].z[(p, c)] / mult[g] as f64).powi(2)).sum();
            scale.push(1.0 / norm2.sqrt());
            let err = (0..256).map(|g| (e[(g, col)] * norm2.sqrt() - {
                d.local_index(i, g).map_or(0.0, |p| cs[i].z[(p, c)] / mult[g] as f64)
            }).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-12);
            col += 1;
        }
    }
    let a0 = m.coarse_matrix();
    let amax = max_abs(&a0_oracle);
    for i in 0..info.dim {
        for j in 0..info.dim {
            assert!((a0[(i, j)] - scale[i] * scale[j] * a0_oracle[i][j]).abs() <= 1e-10 * amax * scale[i] * scale[j]);
        }
    }
    let dense = m.dense_inverse().unwrap();
    let omax = max_abs(&oracle);
    assert!(max_abs(&(0..256).map(|i| (0..256).map(|j| dense[(i, j)] - oracle[i][j]).collect()).collect::<Rows>()) <= 1e-9 * omax);
    let mut r = rng(3);
    for _ in 0..5 {
        let x = random_vec(256, &mut r);
        let z = m.apply(&x).unwrap();
        let zo = matvec(&oracle, &x);
        let zmax = zo.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(z.iter().zip(&zo).all(|(a, b)| (a - b).abs() <= 1e-9 * zmax));
    }
}

#[test]
fn symmetric_variant_is_symmetric_positive_definite() {
    let (sys, d, cs) = setup(16, 4, 2, 3, 1e5);
    let m = TwoLevelPreconditioner::assemble(&sys.a, &d, Some(&cs), Level1Variant::SymmetricAs).unwrap();
    let mut r = rng(4);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for _ in 0..100 {
        let x = random_vec(256, &mut r);
        let y = random_vec(256, &mut r);
        let mx = m.apply(&x).unwrap();
        let my = m.apply(&y).unwrap();
        let nx = dot(&x, &x).sqrt();
        let ny = dot(&y, &y).sqrt();
        assert!((dot(&mx, &y) - dot(&x, &my)).abs() <= 1e-10 * nx * ny);
        assert!(dot(&mx, &x) > 0.0);
    }
}

#[test]
fn weighted_variant_applies_partition_of_unity() {
    let (sys, d, cs) = setup(12, 4, 1, 2, 1e3);
    let w = TwoLevelPreconditioner::assemble(&sys.a, &d, Some(&cs), Level1Variant::WeightedAs).unwrap();
    let plain = TwoLevelPreconditioner::assemble(&sys.a, &d, None, Level1Variant::WeightedAs).unwrap();
    let mut r = rng(5);
    let x = random_vec(144, &mut r);
    let mut z1 = vec![0.0; 144];
    plain.apply_level1(&x, &mut z1);
    let ad = rows_of(&sys.a.to_dense());
    let mut expected = vec![0.0; 144];
    for i in 0..d.k() {
        let idx = d.overlapping(i);
        let ai: Rows = idx.iter().map(|&p| idx.iter().map(|&q| ad[p][q]).collect()).collect();
        let xi: Vec<f64> = idx.iter().map(|&g| x[g]).collect();
        let yi = gauss_solve(&ai, &xi);
        for (p, &g) in idx.iter().enumerate() {
            expected[g] += yi[p] / d.multiplicity()[g] as f64;
        }
    }
    assert!(z1.iter().zip(&expected).all(|(a, b)| (a - b).abs() <= 1e-10 * b.abs().max(1e-3)));
    assert!(preconditioned_spectrum(&sys.a, &w).is_err());
}

#[test]
fn spectrum_trivial_cases() {
    let p = random_psd(12, 12, 1.0, &mut rng(7));
    let a = SymSparseMatrix::from_dense(&Mat::from_fn(12, 12, |i, j| p[i][j])).unwrap();
    let inv = gauss_inverse(&p);
    let ainv = Mat::from_fn(12, 12, |i, j| inv[i][j]);
    let s = dense_preconditioned_spectrum(&a, &ainv).unwrap();
    assert!(s.eigenvalues.iter().all(|l| (l - 1.0).abs() < 1e-10));
    assert!((s.kappa - 1.0).abs() < 1e-10);
    let a = SymSparseMatrix::from_diagonal(&[1.0, 10.0]);
    let s = dense_preconditioned_spectrum(&a, &DenseMatrix::identity(2, 2)).unwrap();
    assert!((s.kappa - 10.0).abs() < 1e-12);
    let big = SymSparseMatrix::identity(5000);
    assert!(matches!(
        dense_preconditioned_spectrum(&big, &DenseMatrix::identity(1, 1)),
        Err(schwarz_core::Error::DenseCapExceeded { .. })
    ));
}

#[test]
fn exact_coarse_space_satisfies_lemma_bound_and_beats_one_level() {
    for kappa_c in [1e3, 1e5] {
        let (sys, d, cs) = setup(32, 4, 1, 8, kappa_c);
        let m2 = TwoLevelPreconditioner::assemble(&sys.a, &d, Some(&cs), Level1Variant::SymmetricAs).unwrap();
        let m1 = TwoLevelPreconditioner::assemble(&sys.a, &d, None, Level1Variant::SymmetricAs).unwrap();
        let s2 = preconditioned_spectrum(&sys.a, &m2).unwrap();
        let s1 = preconditioned_spectrum(&sys.a, &m1).unwrap();
        let stats = overlap_stats(&d);
        let tau = cs.iter().map(|c| c.tau).fold(0.0, f64::max);
        let bound = lemma_bound(stats, tau);
        assert!(s2.kappa <= bound, "kappa {} bound {}", s2.kappa, bound);
        assert!(s2.lambda_min() >= s1.lambda_min() * (1.0 - 1e-10));
        assert!(s2.kappa < s1.kappa);
    }
}
