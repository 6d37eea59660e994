//! Infinitesimal bendings of rank-two hypersurfaces of `R^4`.

pub mod flag;
pub mod rigidity;
pub mod ruled;
pub mod synth;
pub mod verify;

pub use flag::{bendability_flag, BendabilityFlag};
pub use rigidity::{bending_space_dimension, pointwise_constraint_kernel, BendingSpace, PointKernel, Probe};
pub use ruled::{deformed_codazzi, ruled_bending, RuledBending};
pub use synth::{build_b, build_b_from, gate, integrate_s, integrate_t, synthesize, BendingTensors};
pub use verify::{triviality_test, verify_bending, Triviality, VerifyReport};
