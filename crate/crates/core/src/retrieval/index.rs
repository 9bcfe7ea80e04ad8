use std::collections::{HashMap, HashSet};

use super::RetrievalError;
use crate::encoder::EmbeddingMatrix;
use crate::formula_ir::FormulaRecord;
use crate::scalar::normalize_in_place;
use crate::semantic::{embed_text_fallback, extract_context, ContextConfig, SemanticVector};

/// Immutable search index: unit structural rows plus optional semantic
/// vectors keyed by formula id.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    ids: Vec<String>,
    post_ids: Vec<String>,
    dim: usize,
    rows: Vec<f32>,
    semantic: HashMap<String, SemanticVector>,
    semantic_dim: Option<usize>,
}

impl VectorIndex {
    /// Rows are re-normalised; a zero row stays zero and scores 0.
    pub fn new(ids: Vec<String>, post_ids: Vec<String>, dim: usize, mut rows: Vec<f32>) -> Result<Self, RetrievalError> {
        if dim == 0 {
            return Err(RetrievalError::Config("structural dimension must be positive".into()));
        }
        if rows.len() != ids.len() * dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: ids.len() * dim,
                found: rows.len(),
            });
        }
        if post_ids.len() != ids.len() {
            return Err(RetrievalError::Config(format!("{} ids but {} post ids", ids.len(), post_ids.len())));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(RetrievalError::DuplicateId(id.clone()));
            }
        }
        for row in rows.chunks_mut(dim) {
            normalize_in_place(row);
        }
        Ok(VectorIndex {
            ids,
            post_ids,
            dim,
            rows,
            semantic: HashMap::new(),
            semantic_dim: None,
        })
    }

    pub fn from_embeddings(m: EmbeddingMatrix<f32>, post_ids: Vec<String>) -> Result<Self, RetrievalError> {
        Self::new(m.ids, post_ids, m.dim, m.data)
    }

    /// Attaches semantic vectors. All must share one dimension.
    pub fn with_semantic(mut self, vectors: HashMap<String, SemanticVector>) -> Result<Self, RetrievalError> {
        let mut dim = None;
        for v in vectors.values() {
            match dim {
                None => dim = Some(v.dim()),
                Some(d) if d != v.dim() => {
                    return Err(RetrievalError::DimensionMismatch {
                        expected: d,
                        found: v.dim(),
                    })
                }
                _ => {}
            }
        }
        self.semantic = vectors;
        self.semantic_dim = dim;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn semantic_dim(&self) -> Option<usize> {
        self.semantic_dim
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn post_id(&self, i: usize) -> &str {
        &self.post_ids[i]
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn rows(&self) -> &[f32] {
        &self.rows
    }

    pub fn semantic(&self, id: &str) -> Option<&SemanticVector> {
        self.semantic.get(id)
    }
}

/// Where semantic vectors come from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum QuerySemantics {
    /// Structure only: every semantic score is 0.
    #[default]
    None,
    /// Hashed bag-of-words over the record's context.
    Fallback { dim: usize, context: ContextConfig },
    /// Precomputed vectors looked up by formula (or topic) id.
    Imported(HashMap<String, SemanticVector>),
}

impl QuerySemantics {
    pub fn vector_for(&self, record: &FormulaRecord) -> Result<Option<SemanticVector>, RetrievalError> {
        Ok(match self {
            QuerySemantics::None => None,
            QuerySemantics::Fallback { dim, context } => {
                let text = record_context(record, context)?;
                Some(embed_text_fallback(&record.formula_id, &text, *dim))
            }
            QuerySemantics::Imported(map) => map.get(&record.formula_id).cloned(),
        })
    }
}

/// Context text of a record. The record's context column is treated as the
/// post; the window is anchored where the formula source occurs in it, or
/// at the start when it does not.
pub fn record_context(record: &FormulaRecord, cfg: &ContextConfig) -> Result<String, RetrievalError> {
    let post = &record.context;
    let span = match post.find(&record.source_text) {
        Some(at) if !record.source_text.is_empty() => at..at + record.source_text.len(),
        _ => 0..0,
    };
    Ok(extract_context(&record.formula_id, post, span, cfg)?.text)
}
