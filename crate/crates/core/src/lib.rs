//! Numerical laboratory for surface-group representations into SO(p, p-1)
//! through the principal SL(2,R) embedding, their affine deformations and
//! the length spectra of the associated flows.

pub mod affine_deform;
pub mod cli;
pub mod error;
pub mod flag_geometry;
pub mod fuchsian;
pub mod linalg;
pub mod principal_rep;
pub mod spectra;
pub mod surface_group;

pub use error::{Error, Result};
