//! Structural encoder: node-label embedding lookup, stacked GIN layers over
//! the undirected operator graph, mean pooling, and a projection head used
//! only during contrastive training.

mod checkpoint;
mod dense;
pub mod gin;
mod params;
mod vocab;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC};
pub use dense::Dense;
pub use params::{GinLayer, HeadOrder, ModelParams, ProjectionHead, Weights};
pub use vocab::{NodeVocab, MASK_INDEX, RESERVED, UNK_INDEX, UNK_TOKEN, WILD_INDEX, WILD_TOKEN};

use crate::formula_ir::OpgGraph;
use crate::scalar::{normalize_in_place, Scalar};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("vocabulary: {0}")]
    Vocab(String),
    #[error("encoder config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodeMode {
    Train,
    Inference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbedding<T> {
    /// Pooled graph representation (used for retrieval).
    pub h: Vec<T>,
    /// Projected, normalised representation; training mode only.
    pub z: Option<Vec<T>>,
}

pub fn encode<T: Scalar>(
    g: &OpgGraph,
    params: &ModelParams<T>,
    mode: EncodeMode,
) -> Result<GraphEmbedding<T>, EncodeError> {
    params.check_shapes()?;
    let with_head = mode == EncodeMode::Train;
    let tape = gin::forward(g, params, with_head);
    Ok(GraphEmbedding {
        h: tape.h,
        z: with_head.then_some(tape.z),
    })
}

/// Row-aligned embedding matrix with the id of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    pub ids: Vec<String>,
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Inference embeddings (pooled `h`, L2-normalised) for each `(id, graph)`.
/// Rows keep the input order. A pooled vector of zero norm is left as zeros.
pub fn embed_corpus<T: Scalar>(
    corpus: &[(String, OpgGraph)],
    params: &ModelParams<T>,
) -> Result<EmbeddingMatrix<T>, EncodeError> {
    params.check_shapes()?;
    let dim = params.dim();
    let rows: Vec<Vec<T>> = corpus
        .par_iter()
        .map(|(_, g)| {
            let mut h = gin::forward(g, params, false).h;
            normalize_in_place(&mut h);
            h
        })
        .collect();
    Ok(EmbeddingMatrix {
        ids: corpus.iter().map(|(id, _)| id.clone()).collect(),
        dim,
        data: rows.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula_ir::{opt_to_opg, parse_opt_sexpr};
    use crate::scalar::{dot, l2_norm};

    fn opg(s: &str) -> OpgGraph {
        opt_to_opg(&parse_opt_sexpr(s).unwrap())
    }

    fn model(d: usize, layers: usize) -> ModelParams<f64> {
        let corpus = [opg("(= (+ (/ 1 (- a b)) (^ (- a b) 2)) 1)"), opg("(* x (+ y 2))")];
        let v = NodeVocab::build(&corpus, 1).unwrap();
        ModelParams::init(v, d, layers, 3).unwrap()
    }

    #[test]
    fn single_node_depends_only_on_its_row() {
        let p = model(8, 2);
        let a = encode(&opg("x"), &p, EncodeMode::Inference).unwrap();
        // Recompute by hand: no neighbours, so each layer is MLP((1+eps)·x).
        let mut x: Vec<f64> = p.weights.embedding.row(p.vocab.resolve("x")).to_vec();
        for l in &p.weights.layers {
            let s: Vec<f64> = x.iter().map(|v| (1.0 + l.eps) * v).collect();
            let hid: Vec<f64> = dense::affine_rows(&s, 1, &l.w1, &l.b1).into_iter().map(|v| v.max(0.0)).collect();
            x = dense::affine_rows(&hid, 1, &l.w2, &l.b2);
        }
        for (u, v) in a.h.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!(a.z.is_none());
    }

    #[test]
    fn permuted_storage_gives_same_embedding() {
        let p = model(16, 2);
        let g = opg("(= (+ (/ 1 (- a b)) (^ (- a b) 2)) 1)");
        let n = g.node_count();
        let perm: Vec<usize> = (0..n).map(|i| (i * 4 + 3) % n).collect();
        let gp = g.permuted(&perm).unwrap();
        let a = encode(&g, &p, EncodeMode::Train).unwrap();
        let b = encode(&gp, &p, EncodeMode::Train).unwrap();
        for (x, y) in a.h.iter().zip(&b.h) {
            assert!((x - y).abs() < 1e-6);
        }
        let z = a.z.unwrap();
        assert!((l2_norm(&z) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_opgs_embed_identically() {
        let p = model(8, 2);
        let t1 = parse_opt_sexpr("(+ (- a b) (- a b))").unwrap();
        let t2 = parse_opt_sexpr("(+ (- a b) (- a b))").unwrap();
        let a = encode(&opt_to_opg(&t1), &p, EncodeMode::Inference).unwrap();
        let b = encode(&opt_to_opg(&t2), &p, EncodeMode::Inference).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_labels_use_unk_row() {
        let p = model(8, 1);
        let a = encode(&opg("(+ qqq rrr)"), &p, EncodeMode::Inference).unwrap();
        let b = encode(&opg("(+ sss ttt)"), &p, EncodeMode::Inference).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut p = model(8, 1);
        p.weights.embedding = Dense::zeros(2, 8);
        assert!(matches!(
            encode(&opg("x"), &p, EncodeMode::Inference),
            Err(EncodeError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn corpus_rows_are_unit_and_ordered() {
        let p = model(8, 2);
        let corpus = vec![
            ("f1".to_string(), opg("(+ a b)")),
            ("f2".to_string(), opg("(* x 2)")),
            ("f3".to_string(), opg("(+ a b)")),
        ];
        let m = embed_corpus(&corpus, &p).unwrap();
        assert_eq!(m.ids, ["f1", "f2", "f3"]);
        for i in 0..3 {
            assert!((dot(m.row(i), m.row(i)) - 1.0).abs() < 1e-6);
        }
        assert_eq!(m.row(0), m.row(2));
    }
}
