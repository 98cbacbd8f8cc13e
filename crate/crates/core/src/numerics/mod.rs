//! Tensor arithmetic, reverse-mode differentiation, gradient checking, and
//! the Adam update.

mod adam;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use gradcheck::grad_check;
pub use tape::{cosine_value, Gradients, Tape, TensorRef};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("expected a scalar, got shape {shape:?}")]
    NonScalar { shape: Vec<usize> },

    #[error("cosine similarity of a near-zero vector")]
    DegenerateVector,
}
