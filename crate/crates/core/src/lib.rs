//! Formula retrieval with operator-graph embeddings.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod encoder;
pub mod eval;
pub mod formula_ir;
pub mod retrieval;
pub mod scalar;
pub mod semantic;
pub mod synth;
pub mod train;

pub use scalar::Scalar;

pub type ModelParams32 = encoder::ModelParams<f32>;
pub type ModelParams64 = encoder::ModelParams<f64>;
pub type Trainer32 = train::Trainer<f32>;
pub type EmbeddingMatrix32 = encoder::EmbeddingMatrix<f32>;
