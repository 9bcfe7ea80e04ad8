//! Contrastive training: NT-Xent loss, exact gradients, Adam, and a
//! finite-difference gradient checker.

pub mod adam;
pub mod batch;
pub mod grad_check;
pub mod loss;
pub mod trainer;

use thiserror::Error;

use crate::encoder::EncodeError;

pub use adam::{Adam, AdamConfig};
pub use batch::{batch_gradients, batch_loss, project_views, BatchGradients};
pub use grad_check::{grad_check, grad_check_against, CoordCheck, GradCheckConfig, GradCheckReport};
pub use loss::{info_nce_loss, info_nce_with_grad, LossOutput};
#[cfg(feature = "ablation")]
pub use trainer::ABLATION_RATE;
pub use trainer::{
    train, training_view, AugmentMode, BatchLossReport, EpochReport, ModelConfig, TrainConfig, TrainOutcome, Trainer,
    MIN_TRAIN_NODES_EXCLUSIVE,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training config: {0}")]
    Config(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error("need at least 2 positive pairs per batch, got {0}")]
    TooFewPairs(usize),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("no graph with more than two nodes in the training corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
