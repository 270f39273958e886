//! Embedding parameter tables and scoring functions.

mod checkpoint;
mod family;
pub(crate) mod kernels;
mod model;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use family::{Geometry, ModelFamily};
pub use model::{EmbeddingModel, ScoreBatch, INIT_SCALE};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("entity id {id} out of range (|E| = {len})")]
    EntityOutOfRange { id: u32, len: usize },
    #[error("relation id {id} out of range (2|R| = {len})")]
    RelationOutOfRange { id: u32, len: usize },
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("relation normalization is defined for CP and ComplEx, not {0}")]
    RelNormUnsupported(ModelFamily),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
