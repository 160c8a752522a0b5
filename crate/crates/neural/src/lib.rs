//! Minimal dense-tensor stack: f64 tensors, tape-based reverse-mode
//! differentiation, a gated recurrent cell, an adaptive-moment optimizer,
//! and checkpointing. Everything is deterministic for a fixed seed.

pub mod checkpoint;
pub mod gradcheck;
pub mod gru;
pub mod store;
pub mod tape;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use gru::GruCell;
pub use store::{fnv1a, AdamConfig, ParamBinding, ParamStore};
pub use tape::{Gradients, Tape, Val};
pub use tensor::Tensor;

use thiserror::Error as ThisError;

#[derive(Debug, Clone, PartialEq, ThisError)]
pub enum Error {
    #[error("{op}: shape mismatch ({detail})")]
    ShapeMismatch { op: String, detail: String },
    #[error("{op}: non-finite value produced")]
    NonFinite { op: String },
    #[error("backward root must be scalar, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },
    #[error("unknown parameter {name}")]
    UnknownParam { name: String },
    #[error("duplicate parameter {name}")]
    DuplicateParam { name: String },
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}
