use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryConfig, FaceBc, Grid, PermeabilityField};
use crate::error::{Error, Result};
use crate::linalg::SymSparseMatrix;

/// A Dirichlet boundary face: owning cell, half-cell transmissibility and prescribed pressure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirichletFace {
    pub cell: usize,
    pub trans: f64,
    pub pressure: f64,
}

/// Assembled pressure system `A p = b`.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub a: SymSparseMatrix,
    pub b: Vec<f64>,
    pub grid: Grid,
    pub perm: PermeabilityField,
    pub bc: BoundaryConfig,
    pub dirichlet_faces: Vec<DirichletFace>,
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Two-point flux assembly with harmonic face permeabilities.
///
/// Interior faces get `T = area / h · 2κ_Lκ_R / (κ_L + κ_R)`. A Dirichlet face adds the
/// half-cell transmissibility `T_b = 2·area / h · κ` to the diagonal and `T_b·p_D` to `b`, a
/// Neumann face adds `g·area` to `b` (positive `g` is inflow) and the source adds `f·vol`.
pub fn assemble_tpfa(
    grid: &Grid,
    perm: &PermeabilityField,
    bc: &BoundaryConfig,
    source: Option<&[f64]>,
) -> Result<LinearSystem> {
    let n = grid.n_cells();
    let d = grid.dim();
    if perm.len() != n {
        return Err(Error::dims("permeability field", n, perm.len()));
    }
    if let Some(f) = source {
        if f.len() != n {
            return Err(Error::dims("source term", n, f.len()));
        }
    }
    if !bc.has_dirichlet(d) {
        return Err(Error::InvalidParameter(
            "boundary configuration has no Dirichlet face; the pressure system would be singular".into(),
        ));
    }
    let kappa = &perm.values;
    let vol = grid.cell_volume();
    let mut diag = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut off = Vec::with_capacity(d * n);
    let mut dirichlet_faces = Vec::new();

    for cell in 0..n {
        let ijk = grid.coords(cell);
        for axis in 0..d {
            let h = grid.h(axis);
            let area = grid.face_area(axis);
            if let Some(nb) = grid.upper_neighbor(cell, axis) {
                let t = area / h * harmonic(kappa[cell], kappa[nb]);
                diag[cell] += t;
                diag[nb] += t;
                off.push((cell, nb, -t));
            }
            for side in 0..2 {
                let on_face = if side == 0 { ijk[axis] == 0 } else { ijk[axis] + 1 == grid.dims()[axis] };
                if !on_face {
                    continue;
                }
                match bc.faces[axis][side] {
                    FaceBc::Dirichlet(p) => {
                        let t = area / (0.5 * h) * kappa[cell];
                        diag[cell] += t;
                        b[cell] += t * p;
                        dirichlet_faces.push(DirichletFace { cell, trans: t, pressure: p });
                    }
                    FaceBc::Neumann(g) => b[cell] += g * area,
                }
            }
        }
        if let Some(f) = source {
            b[cell] += f[cell] * vol;
        }
    }
    let mut entries = off;
    entries.extend(diag.iter().enumerate().map(|(i, &v)| (i, i, v)));
    let a = SymSparseMatrix::from_upper_triplets(n, entries)?;
    Ok(LinearSystem {
        a,
        b,
        grid: grid.clone(),
        perm: perm.clone(),
        bc: bc.clone(),
        dirichlet_faces,
    })
}

impl LinearSystem {
    /// Outward flux `T_b (p_cell − p_D)` through each Dirichlet face.
    pub fn dirichlet_fluxes(&self, p: &[f64]) -> Vec<f64> {
        self.dirichlet_faces
            .iter()
            .map(|f| f.trans * (p[f.cell] - f.pressure))
            .collect()
    }

    /// Total inflow and outflow over the Dirichlet boundary.
    pub fn flux_balance(&self, p: &[f64]) -> (f64, f64) {
        let mut inflow = 0.0;
        let mut outflow = 0.0;
        for q in self.dirichlet_fluxes(p) {
            if q < 0.0 {
                inflow -= q;
            } else {
                outflow += q;
            }
        }
        (inflow, outflow)
    }

    /// Sorted upper-triangle COO text, one `i j v` line per entry.
    pub fn matrix_coo_text(&self) -> String {
        let mut s = String::with_capacity(self.a.nnz_upper() * 32);
        for (i, j, v) in self.a.upper_entries() {
            let _ = writeln!(s, "{i} {j} {v:e}");
        }
        s
    }

    /// Writes `<stem>.coo` (matrix) and `<stem>.rhs` (raw little-endian `b`).
    pub fn export(&self, dir: &Path, stem: &str) -> Result<()> {
        crate::io::write_atomic(&dir.join(format!("{stem}.coo")), self.matrix_coo_text().as_bytes())?;
        crate::io::write_atomic(&dir.join(format!("{stem}.rhs")), &crate::io::f64s_le(&self.b))
    }
}
