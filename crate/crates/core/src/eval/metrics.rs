//! P'@k and nDCG'@k.
//!
//! nDCG uses gain `2^g − 1` and discount `log2(i + 1)` for 1-based rank `i`;
//! the ideal ordering is the topic's judged grades sorted descending.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use super::qrels::{Qrels, VisualMap, RELEVANT_GRADE};
use super::run::RunRow;
use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilteredRow {
    pub formula_id: String,
    pub visual_id: String,
    pub rank: usize,
    pub grade: u8,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FilterCounts {
    pub input_rows: usize,
    pub kept: usize,
    pub unjudged_removed: usize,
    pub duplicates_removed: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilteredRun {
    pub topics: BTreeMap<String, Vec<FilteredRow>>,
    pub counts: FilterCounts,
}

/// Groups a run by topic and orders each topic by rank, checking that ranks
/// are exactly `1..=n`.
pub(crate) fn group_by_topic(run: &[RunRow]) -> Result<BTreeMap<&str, Vec<&RunRow>>, EvalError> {
    let mut by_topic: BTreeMap<&str, Vec<&RunRow>> = BTreeMap::new();
    for r in run {
        by_topic.entry(&r.topic_id).or_default().push(r);
    }
    for (topic, rows) in &mut by_topic {
        rows.sort_by_key(|r| r.rank);
        for (i, r) in rows.iter().enumerate() {
            if r.rank != i + 1 {
                return Err(EvalError::BadRanks {
                    topic: topic.to_string(),
                    message: format!("ranks are not contiguous from 1 (found {} at position {})", r.rank, i + 1),
                });
            }
        }
    }
    Ok(by_topic)
}

/// Maps formulas to visual ids, keeps the best-ranked instance of each
/// visual id, drops visual ids not judged for the topic, and re-ranks.
pub fn dedup_and_prime(run: &[RunRow], qrels: &Qrels, vmap: &VisualMap) -> Result<FilteredRun, EvalError> {
    let grouped = group_by_topic(run)?;
    let empty = HashMap::new();
    let mut out = FilteredRun::default();
    out.counts.input_rows = run.len();
    for (topic, rows) in grouped {
        let judged = qrels.topics.get(topic).unwrap_or(&empty);
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        for r in rows {
            let vis = vmap.visual_id(&r.formula_id);
            let Some(&grade) = judged.get(vis) else {
                out.counts.unjudged_removed += 1;
                continue;
            };
            if !seen.insert(vis) {
                out.counts.duplicates_removed += 1;
                continue;
            }
            kept.push(FilteredRow {
                formula_id: r.formula_id.clone(),
                visual_id: vis.to_string(),
                rank: kept.len() + 1,
                grade,
            });
        }
        out.counts.kept += kept.len();
        out.topics.insert(topic.to_string(), kept);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricValue {
    pub mean: f64,
    /// `None` where the metric is undefined for the topic (nDCG' with no
    /// graded-relevant judgement) and excluded from the mean.
    pub per_topic: BTreeMap<String, Option<f64>>,
}

fn mean_of(per_topic: &BTreeMap<String, Option<f64>>) -> f64 {
    let vals: Vec<f64> = per_topic.values().flatten().copied().collect();
    if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Fraction of the top `k` filtered results graded relevant, per judged
/// topic (0 for topics missing from the run), and its mean.
pub fn p_prime_at_k(run: &FilteredRun, qrels: &Qrels, k: usize) -> Result<MetricValue, EvalError> {
    if k == 0 {
        return Err(EvalError::BadK);
    }
    let mut per_topic = BTreeMap::new();
    for topic in qrels.topics.keys() {
        let hits = run.topics.get(topic).map_or(0, |rows| {
            rows.iter().take(k).filter(|r| r.grade >= RELEVANT_GRADE).count()
        });
        per_topic.insert(topic.clone(), Some(hits as f64 / k as f64));
    }
    Ok(MetricValue {
        mean: mean_of(&per_topic),
        per_topic,
    })
}

fn gain(grade: u8) -> f64 {
    (1u32 << grade) as f64 - 1.0
}

fn dcg<I: IntoIterator<Item = u8>>(grades: I) -> f64 {
    grades
        .into_iter()
        .enumerate()
        .map(|(i, g)| gain(g) / ((i + 2) as f64).log2())
        .sum()
}

pub fn ndcg_prime_at_k(run: &FilteredRun, qrels: &Qrels, k: usize) -> Result<MetricValue, EvalError> {
    if k == 0 {
        return Err(EvalError::BadK);
    }
    let mut per_topic = BTreeMap::new();
    for (topic, judged) in &qrels.topics {
        let mut ideal: Vec<u8> = judged.values().copied().collect();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        let idcg = dcg(ideal.into_iter().take(k));
        if idcg <= 0.0 {
            per_topic.insert(topic.clone(), None);
            continue;
        }
        let got = run
            .topics
            .get(topic)
            .map_or(0.0, |rows| dcg(rows.iter().take(k).map(|r| r.grade)));
        per_topic.insert(topic.clone(), Some(got / idcg));
    }
    Ok(MetricValue {
        mean: mean_of(&per_topic),
        per_topic,
    })
}
