//! Two-stage ranking: exact structural top-k, then λ-weighted fusion of
//! structural and semantic cosine similarity.

pub mod index;
pub mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::EncodeError;
use crate::formula_ir::IrError;
use crate::semantic::SemanticError;

pub use index::{record_context, QuerySemantics, VectorIndex};
pub use search::{batch_search, embed_query, fuse, search, search_vectors, stage1_topk, BatchOutcome, ScoredResult};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("the index is empty")]
    EmptyIndex,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("search config: {0}")]
    Config(String),
    #[error("duplicate formula id {0:?} in index")]
    DuplicateId(String),
    #[error("query: {0}")]
    Parse(#[from] IrError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Weight of the structural score; the semantic score gets `1 − λ`.
    pub lambda: f64,
    pub stage1_k: usize,
    pub final_n: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            lambda: 0.5,
            stage1_k: 500_000,
            final_n: 1000,
        }
    }
}

impl SearchConfig {
    pub fn desk() -> Self {
        SearchConfig {
            lambda: 0.5,
            stage1_k: 2000,
            final_n: 100,
        }
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(RetrievalError::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if self.final_n == 0 || self.final_n > self.stage1_k {
            return Err(RetrievalError::Config(format!(
                "need 1 <= final_n <= stage1_k, got final_n {} and stage1_k {}",
                self.final_n, self.stage1_k
            )));
        }
        Ok(())
    }
}
