//! Two-level overlapping Schwarz preconditioning with spectral coarse spaces for
//! high-contrast Darcy systems.
//!
//! The pipeline is: generate a permeability field and assemble the TPFA pressure system
//! ([`darcy`]), partition the matrix graph and grow overlaps ([`decomp`]), solve the local
//! generalized spectral problems or import precomputed bases ([`spectral`], [`dataset`]),
//! assemble the preconditioner ([`precond`]) and run preconditioned CG ([`krylov`]).
//! [`subspace`] measures how far an approximate coarse space is from the exact one.

pub mod darcy;
pub mod dataset;
pub mod decomp;
pub mod error;
pub mod io;
pub mod krylov;
pub mod linalg;
pub mod precond;
pub mod spectral;
pub mod subspace;

pub use error::{Error, Result};
