//! Numerical toolkit for Hausdorff-content distortion under planar
//! quasiconformal maps: dyadic geometry, Carleson packings, the Beurling
//! transform on a periodic grid, a Beltrami solver, and experiments that
//! tie them together.

pub mod beltrami;
pub mod beurling;
pub mod distortion;
pub mod dyadic;
pub mod error;
pub mod exec;
pub mod field;
pub mod packing;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Exec;
pub use field::{GridField, GridSpec};
