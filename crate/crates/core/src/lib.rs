//! Row-sampling toolkit for lp subspace embeddings.
//!
//! The crate computes per-row importance scores (leverage scores, lp
//! sensitivities, Lewis weights), applies norm-preserving row-splitting
//! transforms, builds and draws lp sampling matrices, and estimates the
//! sampling error of the result. All randomness flows from explicit 64-bit
//! seeds through a counter-based generator (ChaCha8), so every run is
//! reproducible.

pub mod error;
pub mod flatten;
pub mod generators;
pub mod matrix;
pub mod sampling;
pub mod scores;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::{lp_norm, Matrix, OrthonormalBasis};
pub use scores::{ScoreKind, ScoreVector, TotalSensitivity};
