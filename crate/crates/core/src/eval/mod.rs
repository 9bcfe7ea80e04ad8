//! Primed evaluation metrics after unjudged removal and
//! visual-id deduplication, plus reciprocal rank fusion of runs.

pub mod metrics;
pub mod qrels;
pub mod report;
pub mod rrf;
pub mod run;

use thiserror::Error;

pub use metrics::{dedup_and_prime, ndcg_prime_at_k, p_prime_at_k, FilterCounts, FilteredRow, FilteredRun, MetricValue};
pub use qrels::{read_qrels, read_visual_map, Qrels, VisualMap, RELEVANT_GRADE};
pub use report::{evaluate, EvalReport, TopicScores};
pub use rrf::{rrf_combine, DEFAULT_K_RRF};
pub use run::{read_run, write_run, RunRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("topic {topic}: {message}")]
    BadRanks { topic: String, message: String },
    #[error("k must be at least 1")]
    BadK,
    #[error("rank fusion needs at least two runs, got {0}")]
    TooFewRuns(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
