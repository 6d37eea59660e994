//! Numerical toolkit for surfaces in the three-sphere, the hypersurfaces of
//! four-space they envelope, and infinitesimal bendings of those hypersurfaces.

// Stencil code indexes several parallel arrays per node; `!(a > b)` guards
// are written to reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bending;
pub mod calculus;
pub mod config;
pub mod error;
pub mod field;
pub mod grid;
pub mod hypersurface;
pub mod io;
pub mod linalg;
pub mod pde;
pub mod registry;
pub mod report;
pub mod scalar;
pub mod surface;

pub use error::{Error, ExitClass, Result};
pub use field::{OneForm2, ScalarField, VecField};
pub use grid::{make_grid, Axis, Dir, Grid};
pub use scalar::Real;

pub type ScalarFieldF32 = ScalarField<f32>;
pub type ScalarFieldF64 = ScalarField<f64>;
pub type VecFieldF32 = VecField<f32>;
pub type VecFieldF64 = VecField<f64>;
pub type OneFormF32 = OneForm2<f32>;
pub type OneFormF64 = OneForm2<f64>;
