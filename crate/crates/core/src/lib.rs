//! Progressive knowledge graph completion.
//!
//! A completion run trains a structural embedding model on the known facts,
//! mines the highest-scoring unvisited facts with an exact accelerated top-k
//! search, asks a verifier to accept or reject them, folds accepted facts
//! back into the graph and tracks the resulting completion curve.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root pick `f32`, the storage type of checkpoints.

pub mod kg;
pub mod kge;
pub mod kv;
pub mod mine;
pub mod runner;
pub mod scalar;
pub mod synth;
pub mod train;
pub mod verify;

pub use kg::{ClassDict, FactSet, Triple, Vocabulary};
pub use kge::{EmbeddingModel, ModelFamily};
pub use scalar::Scalar;

/// Single-precision embedding model.
pub type Model = EmbeddingModel<f32>;
/// Double-precision embedding model, used for gradient checks.
pub type Model64 = EmbeddingModel<f64>;
