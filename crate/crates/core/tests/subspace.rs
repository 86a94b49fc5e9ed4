mod support;

use std::f64::consts::PI;

use faer::Mat;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use schwarz_core::linalg::DenseMatrix;
use schwarz_core::subspace::*;
use support::*;

fn to_faer(a: &Rows) -> DenseMatrix {
    Mat::from_fn(a.len(), a[0].len(), |i, j| a[i][j])
}

fn to_rows(a: &DenseMatrix) -> Rows {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

fn gaussian(n: usize, m: usize, r: &mut impl Rng) -> Rows {
    (0..n).map(|_| (0..m).map(|_| StandardNormal.sample(r)).collect()).collect()
}

/// Eigendecomposition-based whitening: project onto the dominant eigenvectors of Ã, then
/// multiply by the inverse square root of the Ã-Gram matrix.
fn whitening_oracle(a: &Rows, v: &Rows) -> Rows {
    let n = a.len();
    let (vals, vecs) = jacobi_eigen(a);
    let lmax = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let img: Vec<usize> = (0..n).filter(|&k| vals[k] > 1e-10 * lmax).collect();
    let mut p = zeros(n, n);
    for &k in &img {
        for i in 0..n {
            for j in 0..n {
                p[i][j] += vecs[i][k] * vecs[j][k];
            }
        }
    }
    let pv = matmul(&p, v);
    let g = matmul(&transpose(&pv), &matmul(a, &pv));
    let (gv, gq) = jacobi_eigen(&g);
    let m = g.len();
    let mut ginv = zeros(m, m);
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                ginv[i][j] += gq[i][k] * gq[j][k] / gv[k].sqrt();
            }
        }
    }
    matmul(&pv, &ginv)
}

#[test]
fn identity_metric_keeps_orthonormal_columns() {
    let op = ImageOperator::from_dense(DenseMatrix::identity(6, 6)).unwrap();
    let mut r = rng(1);
    let q = random_orthogonal(6, &mut r);
    let v = DenseMatrix::from_fn(6, 3, |i, j| q[(i, j)]);
    let s = a_orthonormalize(&op, &v).unwrap();
    for j in 0..3 {
        let d: f64 = (0..6).map(|i| s.y[(i, j)] * v[(i, j)]).sum();
        assert!((d.abs() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn agrees_with_whitening_oracle() {
    let mut r = rng(2);
    for rank in [40, 36] {
        let a = random_psd(40, rank, 0.0, &mut r);
        let v = gaussian(40, 5, &mut r);
        let op = ImageOperator::from_dense(to_faer(&a)).unwrap();
        let s = a_orthonormalize(&op, &to_faer(&v)).unwrap();
        let w = ASubspace { op: op.clone(), y: to_faer(&whitening_oracle(&a, &v)) };
        assert!(dist(&s, &w).unwrap() <= 1e-8);
        let g = matmul(&transpose(&to_rows(&s.y)), &matmul(&a, &to_rows(&s.y)));
        assert!(max_abs(&g.iter().enumerate().map(|(i, row)| row.iter().enumerate().map(|(j, x)| x - (i == j) as u8 as f64).collect()).collect::<Rows>()) <= 1e-8);
    }
}

#[test]
fn one_dimensional_rotation_closed_form() {
    let op = ImageOperator::from_dense(DenseMatrix::identity(2, 2)).unwrap();
    for theta in [PI / 6.0, PI / 4.0, 1.2] {
        let y1 = DenseMatrix::from_fn(2, 1, |i, _| [1.0, 0.0][i]);
        let y2 = DenseMatrix::from_fn(2, 1, |i, _| [theta.cos(), theta.sin()][i]);
        let s1 = a_orthonormalize(&op, &y1).unwrap();
        let s2 = a_orthonormalize(&op, &y2).unwrap();
        let direct = (1.0 - theta.cos().powi(2)).max(0.0).sqrt();
        let d = dist(&s1, &s2).unwrap();
        assert!((d - theta.sin().abs()).abs() < 1e-14);
        assert!((d - direct).abs() < 1e-14);
    }
    let y1 = a_orthonormalize(&op, &DenseMatrix::from_fn(2, 1, |i, _| [1.0, 0.0][i])).unwrap();
    let y2 = a_orthonormalize(&op, &DenseMatrix::from_fn(2, 1, |i, _| [(PI / 6.0).cos(), (PI / 6.0).sin()][i])).unwrap();
    assert!((dist(&y1, &y2).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn identical_spans_are_at_distance_zero() {
    let mut r = rng(3);
    let a = random_psd(25, 25, 0.1, &mut r);
    let op = ImageOperator::from_dense(to_faer(&a)).unwrap();
    for _ in 0..20 {
        let s = random_subspace(&op, 4, &mut r).unwrap();
        let t = s.rebased(&random_orthogonal(4, &mut r));
        assert!(dist(&s, &t).unwrap() <= 1e-12);
        assert!(projector_gap(&s, &t).unwrap() <= 1e-12);
        assert_eq!(dist(&s, &s).unwrap(), 0.0);
    }
}

#[test]
fn metric_properties_random_spd() {
    let mut r = rng(4);
    let a = random_psd(30, 30, 0.05, &mut r);
    let op = ImageOperator::from_dense(to_faer(&a)).unwrap();
    let rep = check_metric_properties(&op, 4, 1000, 5).unwrap();
    assert_eq!(rep.violations(), 0, "{rep:?}");
    assert!(rep.min_excess >= -1e-10);
}

#[test]
fn metric_properties_with_three_dimensional_kernel() {
    let mut r = rng(6);
    let a = random_psd(30, 27, 0.0, &mut r);
    let op = ImageOperator::from_dense(to_faer(&a)).unwrap();
    assert_eq!(op.rank(), 27);
    let rep = check_metric_properties(&op, 4, 300, 7).unwrap();
    assert_eq!(rep.violations(), 0, "{rep:?}");
    // bases stay inside the image
    let s = random_subspace(&op, 4, &mut r).unwrap();
    let (vals, vecs) = jacobi_eigen(&a);
    let lmax = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for k in (0..30).filter(|&k| vals[k] <= 1e-10 * lmax) {
        for j in 0..4 {
            let c: f64 = (0..30).map(|i| vecs[i][k] * s.y[(i, j)]).sum();
            assert!(c.abs() <= 1e-8);
        }
    }
}

#[test]
fn projector_identity_on_random_pairs() {
    let mut r = rng(8);
    let a = random_psd(30, 28, 0.0, &mut r);
    let op = ImageOperator::from_dense(to_faer(&a)).unwrap();
    for n_c in 1..=6 {
        for _ in 0..10 {
            let s1 = random_subspace(&op, n_c, &mut r).unwrap();
            let s2 = random_subspace(&op, n_c, &mut r).unwrap();
            let d = dist(&s1, &s2).unwrap();
            let g = projector_gap(&s1, &s2).unwrap();
            assert!((g * g - 2.0 * d * d).abs() <= 1e-8 * n_c as f64);
            assert!(d >= 0.0 && d <= (n_c as f64).sqrt() + 1e-12);
        }
    }
}

#[test]
fn principal_sines_reproduce_distance() {
    let mut r = rng(9);
    let a = random_psd(20, 20, 0.3, &mut r);
    let op = ImageOperator::from_dense(to_faer(&a)).unwrap();
    let s1 = random_subspace(&op, 3, &mut r).unwrap();
    let s2 = random_subspace(&op, 3, &mut r).unwrap();
    let sines = principal_sines(&s1, &s2).unwrap();
    let sq: f64 = sines.iter().map(|s| s * s).sum();
    assert!((sq.sqrt() - dist(&s1, &s2).unwrap()).abs() < 1e-10);
}

#[test]
fn mismatched_inputs_are_rejected() {
    let mut r = rng(10);
    let op1 = ImageOperator::from_dense(DenseMatrix::identity(5, 5)).unwrap();
    let op2 = ImageOperator::from_dense(DenseMatrix::identity(5, 5) * faer::Scale(2.0)).unwrap();
    let a = random_subspace(&op1, 2, &mut r).unwrap();
    let b = random_subspace(&op1, 3, &mut r).unwrap();
    let c = random_subspace(&op2, 2, &mut r).unwrap();
    assert!(dist(&a, &b).is_err());
    assert!(dist(&a, &c).is_err());
    let dup = DenseMatrix::from_fn(5, 2, |i, _| i as f64 + 1.0);
    assert!(matches!(
        a_orthonormalize(&op1, &dup),
        Err(schwarz_core::Error::RankDeficient { column: 1 })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distance_is_bounded_and_basis_invariant(seed in 0u64..10_000, n in 8usize..30, n_c in 1usize..5, def in 0usize..3) {
        let mut r = rng(seed);
        let a = random_psd(n, n - def, 0.0, &mut r);
        let op = ImageOperator::from_dense(to_faer(&a)).unwrap();
        let s1 = random_subspace(&op, n_c, &mut r).unwrap();
        let s2 = random_subspace(&op, n_c, &mut r).unwrap();
        let d = dist(&s1, &s2).unwrap();
        prop_assert!(d >= 0.0 && d <= (n_c as f64).sqrt() + 1e-12);
        let t1 = s1.rebased(&random_orthogonal(n_c, &mut r));
        prop_assert!((dist(&t1, &s2).unwrap() - d).abs() <= 1e-8);
        prop_assert!((dist(&s2, &s1).unwrap() - d).abs() <= 1e-10);
        prop_assert!(dist_excess(&s1, &s2).unwrap() >= -1e-10);
    }
}
