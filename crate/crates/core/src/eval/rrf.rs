//! Reciprocal rank fusion: `score(d) = Σ_runs 1 / (k + rank_run(d))`.

use std::collections::{BTreeMap, HashMap};

use super::metrics::group_by_topic;
use super::run::RunRow;
use super::EvalError;

pub const DEFAULT_K_RRF: f64 = 60.0;

/// Fuses runs per topic. Only the first `depth` ranks of each input are
/// read, and at most `depth` results per topic are emitted. Ties are broken
/// by ascending formula id.
pub fn rrf_combine(runs: &[Vec<RunRow>], k_rrf: f64, depth: usize, run_tag: &str) -> Result<Vec<RunRow>, EvalError> {
    if runs.len() < 2 {
        return Err(EvalError::TooFewRuns(runs.len()));
    }
    let mut fused: BTreeMap<&str, HashMap<&str, (f64, &str)>> = BTreeMap::new();
    for run in runs {
        for (topic, rows) in group_by_topic(run)? {
            let acc = fused.entry(topic).or_default();
            for r in rows.iter().take(depth) {
                let e = acc.entry(&r.formula_id).or_insert((0.0, &r.post_id));
                e.0 += 1.0 / (k_rrf + r.rank as f64);
            }
        }
    }
    let mut out = Vec::new();
    for (topic, acc) in fused {
        let mut scored: Vec<(&str, f64, &str)> = acc.into_iter().map(|(id, (s, p))| (id, s, p)).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        for (i, (id, score, post)) in scored.into_iter().take(depth).enumerate() {
            out.push(RunRow {
                topic_id: topic.to_string(),
                formula_id: id.to_string(),
                post_id: post.to_string(),
                rank: i + 1,
                score,
                run_tag: run_tag.to_string(),
            });
        }
    }
    Ok(out)
}
