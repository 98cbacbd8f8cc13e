//! Pluggable text-to-vector interface: a deterministic feature-hashing
//! fallback plus import of precomputed vectors (e.g. from an external
//! language model) in the embedding exchange format.

use std::path::Path;

use thiserror::Error;

use crate::exchange::{read_embeddings, EmbeddingSet, ExchangeError};
use crate::scalar::Scalar;

/// Token budget for the fallback encoder; everything past it is dropped.
const MAX_TOKENS: usize = 1024;

#[derive(Debug, Error)]
pub enum TextEncError {
    #[error(transparent)]
    Exchange(#[from] ExchangeError),

    #[error("no precomputed vector for entity `{id}`")]
    MissingVector { id: String },
}

/// Deterministic vector with a marker for empty input text.
#[derive(Debug, Clone, PartialEq)]
pub struct TextVector<S: Scalar> {
    pub values: Vec<S>,
    /// True when the input had no tokens; the vector is all-zero then.
    pub empty_text: bool,
}

/// Text encoder; immutable after construction, so concurrent encode calls
/// are safe.
#[derive(Debug, Clone)]
pub enum TextEncoder<S: Scalar> {
    /// Signed feature hashing of lowercased tokens, L2-normalized.
    FallbackHash { dim: usize },
    /// Vectors served verbatim from a loaded file, keyed by entity id.
    Precomputed { vectors: EmbeddingSet<S> },
}

impl<S: Scalar> TextEncoder<S> {
    pub fn fallback(dim: usize) -> Self {
        Self::FallbackHash { dim }
    }

    /// Load precomputed vectors from the embedding exchange format; the
    /// dimension comes from the file header.
    pub fn load_precomputed(path: &Path) -> Result<Self, TextEncError> {
        Ok(Self::Precomputed {
            vectors: read_embeddings(path)?,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::FallbackHash { dim } => *dim,
            Self::Precomputed { vectors } => vectors.dim(),
        }
    }

    /// Encode one entity. The fallback hashes `text`; the precomputed
    /// encoder answers by `id` and errors on unknown ids.
    pub fn encode(&self, id: &str, text: &str) -> Result<TextVector<S>, TextEncError> {
        match self {
            Self::FallbackHash { dim } => Ok(hash_encode(text, *dim)),
            Self::Precomputed { vectors } => {
                let v = vectors.get(id).ok_or_else(|| TextEncError::MissingVector {
                    id: id.to_string(),
                })?;
                Ok(TextVector {
                    values: v.to_vec(),
                    empty_text: false,
                })
            }
        }
    }
}

/// Signed feature hashing: lowercase, split on non-alphanumeric, cap at
/// 1024 tokens, hash each token to a bucket with a sign bit from a second
/// hash, then L2-normalize. Empty text yields a flagged zero vector.
pub fn hash_encode<S: Scalar>(text: &str, dim: usize) -> TextVector<S> {
    let mut counts = vec![0.0f64; dim];
    let mut any = false;
    for token in tokenize(text).take(MAX_TOKENS) {
        any = true;
        let bucket = (fnv1a(token.as_bytes(), BUCKET_SEED) % dim as u64) as usize;
        let sign = if fnv1a(token.as_bytes(), SIGN_SEED) & 1 == 0 {
            1.0
        } else {
            -1.0
        };
        counts[bucket] += sign;
    }
    if !any {
        return TextVector {
            values: vec![S::zero(); dim],
            empty_text: true,
        };
    }
    let norm = counts.iter().map(|v| v * v).sum::<f64>().sqrt();
    let values = if norm > 0.0 {
        counts.iter().map(|&v| S::from_double(v / norm)).collect()
    } else {
        // Sign cancellations can zero out every bucket; keep the vector
        // zero but unflagged so the caller knows text was present.
        vec![S::zero(); dim]
    };
    TextVector {
        values,
        empty_text: false,
    }
}

fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

const BUCKET_SEED: u64 = 0xcbf2_9ce4_8422_2325;
const SIGN_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// FNV-1a with a configurable offset basis; stable across builds.
pub fn fnv1a(bytes: &[u8], basis: u64) -> u64 {
    let mut h = basis;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
