//! Cell-centered finite volumes for single-phase Darcy flow on the unit box.

mod perm;
mod tpfa;

pub use perm::{
    gen_channels, gen_constant, gen_lognormal, gen_lognormal_with, rasterize_channels, Channel, ChannelParams,
    GrfMethod, PermeabilityField, Provenance, KL_MAX_CELLS, KL_MODES,
};
pub use tpfa::{assemble_tpfa, DirichletFace, LinearSystem};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform Cartesian grid of the unit square or cube.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    dims: Vec<usize>,
}

impl Grid {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.len() != 2 && dims.len() != 3 {
            return Err(Error::InvalidParameter(format!(
                "grid must be 2D or 3D, got {} dimensions",
                dims.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidParameter(format!("grid dimension {d} < 2")));
        }
        Ok(Self { dims: dims.to_vec() })
    }

    pub fn new_2d(nx: usize, ny: usize) -> Result<Self> {
        Self::new(&[nx, ny])
    }

    pub fn new_3d(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        Self::new(&[nx, ny, nz])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    /// Cell width along `axis`.
    pub fn h(&self, axis: usize) -> f64 {
        1.0 / self.dims[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.h(a)).product()
    }

    /// Area of a face normal to `axis`.
    pub fn face_area(&self, axis: usize) -> f64 {
        (0..self.dim()).filter(|&b| b != axis).map(|b| self.h(b)).product()
    }

    /// Linear index with x fastest.
    pub fn index(&self, ijk: [usize; 3]) -> usize {
        let mut idx = 0;
        for a in (0..self.dim()).rev() {
            idx = idx * self.dims[a] + ijk[a];
        }
        idx
    }

    pub fn coords(&self, mut cell: usize) -> [usize; 3] {
        let mut ijk = [0; 3];
        for a in 0..self.dim() {
            ijk[a] = cell % self.dims[a];
            cell /= self.dims[a];
        }
        ijk
    }

    /// Cell center in unit-box coordinates (unused axes are zero).
    pub fn center(&self, cell: usize) -> [f64; 3] {
        let ijk = self.coords(cell);
        let mut x = [0.0; 3];
        for a in 0..self.dim() {
            x[a] = (ijk[a] as f64 + 0.5) * self.h(a);
        }
        x
    }

    /// Neighbor across the face on the positive side of `axis`, if any.
    pub fn upper_neighbor(&self, cell: usize, axis: usize) -> Option<usize> {
        let mut ijk = self.coords(cell);
        if ijk[axis] + 1 >= self.dims[axis] {
            return None;
        }
        ijk[axis] += 1;
        Some(self.index(ijk))
    }
}

/// Face condition on one side of the box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FaceBc {
    /// Prescribed pressure.
    Dirichlet(f64),
    /// Prescribed inflow flux density.
    Neumann(f64),
}

/// Conditions on the `2·dim` faces of the box, indexed `[axis][side]` with side 0 the face
/// at coordinate 0 and side 1 the face at coordinate 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConfig {
    pub faces: [[FaceBc; 2]; 3],
}

impl BoundaryConfig {
    pub fn all_neumann() -> Self {
        Self {
            faces: [[FaceBc::Neumann(0.0); 2]; 3],
        }
    }

    /// Flow in y: `p = 0` on `y = 0`, `p = 1` on `y = 1`, no-flow elsewhere.
    pub fn c1() -> Self {
        let mut bc = Self::all_neumann();
        bc.faces[1] = [FaceBc::Dirichlet(0.0), FaceBc::Dirichlet(1.0)];
        bc
    }

    /// Flow in x: `p = 1` on `x = 0`, `p = 0` on `x = 1`, no-flow elsewhere.
    pub fn c2() -> Self {
        let mut bc = Self::all_neumann();
        bc.faces[0] = [FaceBc::Dirichlet(1.0), FaceBc::Dirichlet(0.0)];
        bc
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "C1" => Ok(Self::c1()),
            "C2" => Ok(Self::c2()),
            _ => Err(Error::InvalidParameter(format!("unknown boundary preset {name:?}"))),
        }
    }

    pub fn has_dirichlet(&self, dim: usize) -> bool {
        self.faces[..dim]
            .iter()
            .flatten()
            .any(|f| matches!(f, FaceBc::Dirichlet(_)))
    }
}
