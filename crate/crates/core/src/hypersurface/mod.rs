//! Rank-two hypersurfaces from Gauss data and envelopes, their splitting
//! tensor and the surface-like / ruled / hyperbolic / elliptic classification.

pub mod classify;
pub mod envelope;
pub mod pair;
pub mod sample;

pub use classify::{classify, splitting_tensor, Classification, Splitting, Verdict};
pub use envelope::{envelope_cross_check, envelope_solve, leaf_distance, EnvelopeSystem, Leaf};
pub use pair::{pair_from_phi, pair_from_samples, GaussPair};
pub use sample::{from_parts, from_samples, gauss_checks, gauss_parametrize, rank_profile, GaussChecks, HypersurfaceSample, RankProfile};
