//! Dense tensors with reverse-mode differentiation, optimizers, seeded
//! randomness and parameter checkpoints. Everything trainable in the crate
//! is expressed with these pieces.

mod checkpoint;
mod optim;
mod params;
mod rng;
mod tape;
mod tensor;

use thiserror::Error;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_into, load_params, save_params, write_atomic,
    CheckpointError, CheckpointManifest, TensorEntry, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use optim::{clip_gradients, AdamState, Sgd};
pub use params::ParamSet;
pub use rng::{RngState, RNG_ALGORITHM};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFiniteValue { op: &'static str },
    #[error("non-finite gradient at tape node {node}")]
    NonFiniteGradient { node: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl AutodiffError {
    pub(crate) fn shape(op: &'static str, detail: String) -> Self {
        Self::ShapeMismatch { op, detail }
    }
}
