use schwarz_core::darcy::*;
use schwarz_core::linalg::SpdFactor;

fn solve(sys: &LinearSystem) -> Vec<f64> {
    SpdFactor::new(&sys.a).unwrap().solve(&sys.b).unwrap()
}

fn sample_stats(z: &[Vec<f64>]) -> (f64, f64) {
    let n: f64 = z.iter().map(|v| v.len() as f64).sum();
    let mean = z.iter().flatten().sum::<f64>() / n;
    let var = z.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

#[test]
fn vanishing_variance_gives_unit_field() {
    let g = Grid::new_2d(32, 32).unwrap();
    let k = gen_lognormal(&g, 1e-12, &[0.05, 0.05], 3).unwrap();
    assert!(k.values.iter().all(|v| (v - 1.0).abs() <= 1e-5));
}

#[test]
fn lognormal_variance_is_close_to_sigma2() {
    let g = Grid::new_2d(64, 64).unwrap();
    let logs: Vec<Vec<f64>> = (0..20)
        .map(|s| gen_lognormal(&g, 2.0, &[0.05, 0.05], s).unwrap().values.iter().map(|v| v.ln()).collect())
        .collect();
    let (_, var) = sample_stats(&logs);
    assert!((1.5..=2.5).contains(&var), "variance {var}");
}

#[test]
fn lognormal_correlation_at_one_length() {
    let (nx, lag) = (128, 8);
    let eta = lag as f64 / nx as f64;
    let g = Grid::new_2d(nx, nx).unwrap();
    let logs: Vec<Vec<f64>> = (0..20)
        .map(|s| gen_lognormal(&g, 2.0, &[eta, eta], 100 + s).unwrap().values.iter().map(|v| v.ln()).collect())
        .collect();
    let (mean, var) = sample_stats(&logs);
    for axis in 0..2 {
        let mut acc = 0.0;
        let mut count = 0.0;
        for z in &logs {
            for c in 0..g.n_cells() {
                let mut ijk = g.coords(c);
                if ijk[axis] + lag >= nx {
                    continue;
                }
                ijk[axis] += lag;
                acc += (z[c] - mean) * (z[g.index(ijk)] - mean);
                count += 1.0;
            }
        }
        let rho = acc / count / var;
        assert!((rho - (-1.0f64).exp()).abs() <= 0.15, "axis {axis}: correlation {rho}");
    }
}

#[test]
fn lognormal_is_deterministic_per_seed() {
    let g = Grid::new_3d(8, 8, 8).unwrap();
    let a = gen_lognormal(&g, 2.0, &[0.1, 0.1, 0.1], 9).unwrap();
    let b = gen_lognormal(&g, 2.0, &[0.1, 0.1, 0.1], 9).unwrap();
    let c = gen_lognormal(&g, 2.0, &[0.1, 0.1, 0.1], 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.values, c.values);
}

#[test]
fn karhunen_loeve_fallback_has_the_right_variance() {
    let g = Grid::new_2d(24, 24).unwrap();
    let logs: Vec<Vec<f64>> = (0..20)
        .map(|s| {
            let k = gen_lognormal_with(&g, 2.0, &[0.05, 0.05], s, GrfMethod::KarhunenLoeve).unwrap();
            assert!(matches!(k.provenance, Provenance::Lognormal { method: GrfMethod::KarhunenLoeve, .. }));
            k.values.iter().map(|v| v.ln()).collect()
        })
        .collect();
    let (_, var) = sample_stats(&logs);
    assert!((1.5..=2.5).contains(&var), "variance {var}");
}

#[test]
fn lognormal_rejects_bad_parameters() {
    let g = Grid::new_2d(8, 8).unwrap();
    assert!(gen_lognormal(&g, 0.0, &[0.1, 0.1], 0).is_err());
    assert!(gen_lognormal(&g, 1.0, &[0.1, -0.1], 0).is_err());
    assert!(gen_lognormal(&g, 1.0, &[0.1], 0).is_err());
}

#[test]
fn no_channels_gives_unit_field() {
    let g = Grid::new_2d(32, 32).unwrap();
    let mut p = ChannelParams::scaled_default(&g, 1e3);
    p.n_range = (0, 0);
    let k = gen_channels(&g, &p, 5).unwrap();
    assert!(k.values.iter().all(|&v| v == 1.0));
}

#[test]
fn horizontal_channel_is_three_rows_wide() {
    let g = Grid::new_2d(32, 32).unwrap();
    let ch = Channel { start: [0.0, 10.5, 0.0], end: [32.0, 10.5, 0.0], width: 3.0 };
    let v = rasterize_channels(&g, &[ch], 1e5);
    let high_rows: Vec<usize> = (0..32).filter(|&j| v[g.index([0, j, 0])] == 1e5).collect();
    assert_eq!(high_rows, vec![9, 10, 11]);
    for j in 0..32 {
        let expect = if high_rows.contains(&j) { 1e5 } else { 1.0 };
        assert!((0..32).all(|i| v[g.index([i, j, 0])] == expect));
    }
}

#[test]
fn channel_values_are_two_valued() {
    for g in [Grid::new_2d(64, 64).unwrap(), Grid::new_3d(16, 16, 16).unwrap()] {
        let k = gen_channels(&g, &ChannelParams::scaled_default(&g, 1e3), 21).unwrap();
        assert!(k.values.iter().all(|&v| v == 1.0 || v == 1e3));
        assert!(k.values.iter().any(|&v| v == 1e3));
        assert!(k.values.iter().any(|&v| v == 1.0));
    }
}

#[test]
fn hand_assembled_two_by_two() {
    let g = Grid::new_2d(2, 2).unwrap();
    let k = gen_constant(&g, 1.0).unwrap();
    let bc = BoundaryConfig { faces: [[FaceBc::Dirichlet(0.0); 2]; 3] };
    let sys = assemble_tpfa(&g, &k, &bc, None).unwrap();
    // cells (x fastest): 0=(0,0), 1=(1,0), 2=(0,1), 3=(1,1); h = area = 1/2
    let oracle = [
        [6.0, -1.0, -1.0, 0.0],
        [-1.0, 6.0, 0.0, -1.0],
        [-1.0, 0.0, 6.0, -1.0],
        [0.0, -1.0, -1.0, 6.0],
    ];
    let a = sys.a.to_dense();
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(a[(i, j)], oracle[i][j]);
        }
    }
    assert!(sys.b.iter().all(|&v| v == 0.0));
}

fn max_interior_error(sys: &LinearSystem, p: &[f64], exact: impl Fn([f64; 3]) -> f64) -> f64 {
    (0..sys.grid.n_cells()).fold(0.0f64, |m, c| m.max((p[c] - exact(sys.grid.center(c))).abs()))
}

#[test]
fn constant_coefficient_gives_linear_profiles() {
    for g in [Grid::new_2d(16, 12).unwrap(), Grid::new_3d(6, 7, 5).unwrap()] {
        let k = gen_constant(&g, 2.5).unwrap();
        let s1 = assemble_tpfa(&g, &k, &BoundaryConfig::c1(), None).unwrap();
        assert!(max_interior_error(&s1, &solve(&s1), |x| x[1]) <= 1e-10);
        let s2 = assemble_tpfa(&g, &k, &BoundaryConfig::c2(), None).unwrap();
        assert!(max_interior_error(&s2, &solve(&s2), |x| 1.0 - x[0]) <= 1e-10);
    }
}

#[test]
fn dirichlet_flux_balances_without_sources() {
    let g = Grid::new_2d(32, 32).unwrap();
    let k = gen_lognormal(&g, 2.0, &[0.05, 0.05], 4).unwrap();
    for bc in [BoundaryConfig::c1(), BoundaryConfig::c2()] {
        let sys = assemble_tpfa(&g, &k, &bc, None).unwrap();
        let (inflow, outflow) = sys.flux_balance(&solve(&sys));
        assert!(inflow > 0.0);
        assert!((inflow - outflow).abs() <= 1e-9 * inflow, "{inflow} vs {outflow}");
    }
}

#[test]
fn neumann_inflow_leaves_through_dirichlet_faces() {
    let g = Grid::new_2d(10, 10).unwrap();
    let k = gen_constant(&g, 1.0).unwrap();
    let mut bc = BoundaryConfig::c1();
    bc.faces[0][0] = FaceBc::Neumann(0.7);
    let sys = assemble_tpfa(&g, &k, &bc, None).unwrap();
    let net: f64 = sys.dirichlet_fluxes(&solve(&sys)).iter().sum();
    assert!((net - 0.7).abs() <= 1e-10, "net outflow {net}");
}

#[test]
fn assembly_structure_and_symmetry() {
    for g in [Grid::new_2d(9, 7).unwrap(), Grid::new_3d(5, 4, 3).unwrap()] {
        let k = gen_lognormal(&g, 2.0, &vec![0.1; g.dim()], 8).unwrap();
        let sys = assemble_tpfa(&g, &k, &BoundaryConfig::c2(), None).unwrap();
        let a = sys.a.to_dense();
        let n = g.n_cells();
        for i in 0..n {
            let (cols, vals) = sys.a.row(i);
            assert!(cols.len() <= 2 * g.dim() + 1);
            let mut off = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                assert_eq!(a[(i, j)], a[(j, i)]);
                if j != i {
                    assert!(v < 0.0);
                    off += v.abs();
                    let (ci, cj) = (g.coords(i), g.coords(j));
                    let manhattan: usize = (0..3).map(|x| ci[x].abs_diff(cj[x])).sum();
                    assert_eq!(manhattan, 1);
                }
            }
            assert!(sys.a.get(i, i) >= off * (1.0 - 1e-15));
        }
        assert!(SpdFactor::new(&sys.a).is_ok());
    }
}

#[test]
fn removing_dirichlet_terms_leaves_zero_row_sums() {
    let g = Grid::new_2d(12, 12).unwrap();
    let k = gen_lognormal(&g, 2.0, &[0.05, 0.05], 2).unwrap();
    let sys = assemble_tpfa(&g, &k, &BoundaryConfig::c1(), None).unwrap();
    let mut shift = vec![0.0; g.n_cells()];
    for f in &sys.dirichlet_faces {
        shift[f.cell] -= f.trans;
    }
    let neumann = sys.a.add_diagonal(&shift).unwrap();
    let y = neumann.matvec(&vec![1.0; g.n_cells()]).unwrap();
    let tol = 1e-12 * neumann.max_abs();
    assert!(y.iter().all(|v| v.abs() <= tol));
}

#[test]
fn scaling_permeability_scales_the_system() {
    let g = Grid::new_2d(16, 16).unwrap();
    let k = gen_lognormal(&g, 2.0, &[0.05, 0.05], 6).unwrap();
    let base = assemble_tpfa(&g, &k, &BoundaryConfig::c1(), None).unwrap();
    for c in [4.0, 0.25] {
        let scaled = assemble_tpfa(&g, &k.scaled(c).unwrap(), &BoundaryConfig::c1(), None).unwrap();
        for ((i, j, v), (p, q, w)) in base.a.upper_entries().zip(scaled.a.upper_entries()) {
            assert_eq!((i, j), (p, q));
            assert_eq!(w, c * v);
        }
        for (x, y) in base.b.iter().zip(&scaled.b) {
            assert_eq!(*y, c * x);
        }
    }
    let scaled = assemble_tpfa(&g, &k.scaled(3.0).unwrap(), &BoundaryConfig::c1(), None).unwrap();
    for ((_, _, v), (_, _, w)) in base.a.upper_entries().zip(scaled.a.upper_entries()) {
        assert!((w - 3.0 * v).abs() <= 4.0 * f64::EPSILON * w.abs());
    }
}

#[test]
fn source_term_enters_with_cell_volume() {
    let g = Grid::new_2d(4, 4).unwrap();
    let k = gen_constant(&g, 1.0).unwrap();
    let f = vec![16.0; 16];
    let with = assemble_tpfa(&g, &k, &BoundaryConfig::c1(), Some(&f)).unwrap();
    let without = assemble_tpfa(&g, &k, &BoundaryConfig::c1(), None).unwrap();
    for (x, y) in with.b.iter().zip(&without.b) {
        assert!((x - y - 1.0).abs() < 1e-15);
    }
    assert!(assemble_tpfa(&g, &k, &BoundaryConfig::c1(), Some(&f[..3])).is_err());
}

#[test]
fn raster_and_coo_exports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::new_2d(6, 5).unwrap();
    let k = gen_lognormal(&g, 2.0, &[0.1, 0.1], 1).unwrap();
    let path = dir.path().join("k.raster");
    k.write_raster(&g, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let header_end = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header: serde_json::Value = serde_json::from_slice(&bytes[..header_end]).unwrap();
    assert_eq!(header["dims"], serde_json::json!([6, 5]));
    assert_eq!(header["seed"], serde_json::json!(1));
    let (g2, k2) = PermeabilityField::from_raster_bytes(&bytes).unwrap();
    assert_eq!(g2, g);
    assert_eq!(k2, k);

    let sys = assemble_tpfa(&g, &k, &BoundaryConfig::c1(), None).unwrap();
    sys.export(dir.path(), "sys").unwrap();
    let text = std::fs::read_to_string(dir.path().join("sys.coo")).unwrap();
    let parsed: Vec<(usize, usize, f64)> = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let orig: Vec<(usize, usize, f64)> = sys.a.upper_entries().collect();
    assert_eq!(parsed, orig);
    let rhs = std::fs::read(dir.path().join("sys.rhs")).unwrap();
    let b: Vec<f64> = rhs.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    assert_eq!(b, sys.b);
}
