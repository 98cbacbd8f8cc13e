//! Unified vector embeddings for MOOC entities.
//!
//! Learns one embedding space for courses, lectures, and concepts from the
//! hierarchical course structure: lectures and concepts are trainable table
//! rows seeded from text, courses are encoded by a position-aware
//! transformer over their lecture sequence. Training combines a
//! margin-ranking objective over an entity relation graph with a regression
//! objective onto heuristic concept-complexity targets, and the resulting
//! embeddings are evaluated on prerequisite prediction and next-lecture
//! recommendation.
//!
//! All numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! `f64` is the reference precision used by verification and determinism
//! guarantees.

pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod exchange;
pub mod graph;
pub mod numerics;
pub mod objectives;
pub mod scalar;
pub mod textenc;
pub mod trainer;

pub use scalar::Scalar;

/// Reference-precision tensor.
pub type Tensor64 = numerics::Tensor<f64>;
/// Fast-mode tensor.
pub type Tensor32 = numerics::Tensor<f32>;
/// Reference-precision tape.
pub type Tape64 = numerics::Tape<f64>;
/// Fast-mode tape.
pub type Tape32 = numerics::Tape<f32>;
/// Reference-precision text encoder.
pub type TextEncoder64 = textenc::TextEncoder<f64>;
/// Reference-precision embedding collection.
pub type EmbeddingSet64 = exchange::EmbeddingSet<f64>;
