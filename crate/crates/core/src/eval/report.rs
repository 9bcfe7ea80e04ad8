use std::fmt::Write as _;

use serde::Serialize;

use super::metrics::{dedup_and_prime, ndcg_prime_at_k, p_prime_at_k, FilterCounts};
use super::qrels::{Qrels, VisualMap};
use super::run::RunRow;
use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicScores {
    pub topic_id: String,
    pub p_at_5: f64,
    pub p_at_10: f64,
    pub ndcg_at_10: Option<f64>,
    /// Results left after filtering.
    pub kept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub topics: usize,
    pub mean_p_at_5: f64,
    pub mean_p_at_10: f64,
    pub mean_ndcg_at_10: f64,
    /// Number of judgements in the qrels.
    pub judged: usize,
    pub counts: FilterCounts,
    pub per_topic: Vec<TopicScores>,
}

pub fn evaluate(run: &[RunRow], qrels: &Qrels, vmap: &VisualMap) -> Result<EvalReport, EvalError> {
    let filtered = dedup_and_prime(run, qrels, vmap)?;
    let p5 = p_prime_at_k(&filtered, qrels, 5)?;
    let p10 = p_prime_at_k(&filtered, qrels, 10)?;
    let ndcg = ndcg_prime_at_k(&filtered, qrels, 10)?;
    let per_topic = qrels
        .topics
        .keys()
        .map(|t| TopicScores {
            topic_id: t.clone(),
            p_at_5: p5.per_topic[t].unwrap_or(0.0),
            p_at_10: p10.per_topic[t].unwrap_or(0.0),
            ndcg_at_10: ndcg.per_topic[t],
            kept: filtered.topics.get(t).map_or(0, Vec::len),
        })
        .collect();
    Ok(EvalReport {
        topics: qrels.topics.len(),
        mean_p_at_5: p5.mean,
        mean_p_at_10: p10.mean,
        mean_ndcg_at_10: ndcg.mean,
        judged: qrels.topics.values().map(|m| m.len()).sum(),
        counts: filtered.counts,
        per_topic,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} {:>7} {:>7} {:>9} {:>6}", "topic", "P'@5", "P'@10", "nDCG'@10", "kept");
        for t in &self.per_topic {
            let n = t.ndcg_at_10.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(s, "{:<12} {:>7.4} {:>7.4} {:>9} {:>6}", t.topic_id, t.p_at_5, t.p_at_10, n, t.kept);
        }
        let _ = writeln!(
            s,
            "{:<12} {:>7.4} {:>7.4} {:>9.4} {:>6}",
            "mean", self.mean_p_at_5, self.mean_p_at_10, self.mean_ndcg_at_10, self.counts.kept
        );
        let _ = writeln!(
            s,
            "{} topics, {} judgements; {} rows in, {} unjudged and {} duplicates removed",
            self.topics, self.judged, self.counts.input_rows, self.counts.unjudged_removed, self.counts.duplicates_removed
        );
        s
    }
}
