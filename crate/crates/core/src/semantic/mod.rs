//! Semantic vectors from the text around a formula: context extraction, a
//! hashed bag-of-words fallback, and import of precomputed vectors.

pub mod context;
pub mod fallback;
pub mod vecfile;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use context::{extract_context, Anchor, ContextConfig, ContextText, TruncationUnit};
pub use fallback::{embed_text_fallback, fnv1a64, DEFAULT_FALLBACK_DIM};
pub use vecfile::{import_vectors, read_vector_file, write_vector_file, VectorFile, DEFAULT_IMPORT_DIM, VECFILE_MAGIC};

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error("formula span {start}..{end} is outside the {len}-byte post or splits a character")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
    #[error("corrupt vector file: {0}")]
    Corrupt(String),
    #[error("duplicate formula id {0:?} in vector file")]
    DuplicateId(String),
    #[error("vector dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    Imported,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticVector {
    pub formula_id: String,
    pub v: Vec<f32>,
    pub provider: Provider,
    /// False for the all-zeros vector (empty text, or a zero row on import),
    /// which scores 0 against everything.
    pub normalized: bool,
}

impl SemanticVector {
    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// Cosine of two unit vectors; 0 when either side is not normalizable.
    pub fn cosine(&self, other: &SemanticVector) -> f32 {
        if !self.normalized || !other.normalized {
            return 0.0;
        }
        crate::scalar::dot(&self.v, &other.v)
    }
}
