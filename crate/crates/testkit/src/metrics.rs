use std::collections::{BTreeMap, HashMap, HashSet};

use fsearch_core::eval::{Qrels, RunRow, VisualMap};
use rand::Rng;

/// A run with its judgements and visual-id grouping.
#[derive(Debug, Clone)]
pub struct EvalInstance {
    pub run: Vec<RunRow>,
    pub qrels: Qrels,
    pub visual: HashMap<String, String>,
}

impl EvalInstance {
    pub fn visual_map(&self) -> VisualMap {
        VisualMap::from_pairs(self.visual.clone())
    }
}

pub fn row(topic: &str, formula: &str, rank: usize, score: f64) -> RunRow {
    RunRow {
        topic_id: topic.to_string(),
        formula_id: formula.to_string(),
        post_id: format!("post_{formula}"),
        rank,
        score,
        run_tag: "t".to_string(),
    }
}

/// `docs` formulas grouped into about two thirds as many visual ids, and
/// `topics` topics each judging a random subset of visual ids and ranking a
/// random subset of formulas. Some topics may be missing from the run.
pub fn random_instance<R: Rng>(rng: &mut R, docs: usize, topics: usize) -> EvalInstance {
    let n_visual = (docs * 2 / 3).max(1);
    let visual: HashMap<String, String> = (0..docs)
        .map(|d| (format!("f{d:02}"), format!("v{:02}", rng.random_range(0..n_visual))))
        .collect();
    let mut qrels = Qrels::default();
    let mut run = Vec::new();
    for t in 0..topics {
        let topic = format!("T{t}");
        for v in 0..n_visual {
            if rng.random_bool(0.5) {
                qrels.insert(&topic, &format!("v{v:02}"), rng.random_range(0..=3));
            }
        }
        if rng.random_bool(0.1) {
            continue;
        }
        let mut order: Vec<usize> = (0..docs).filter(|_| rng.random_bool(0.7)).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for (i, d) in order.into_iter().enumerate() {
            run.push(row(&topic, &format!("f{d:02}"), i + 1, 100.0 - i as f64));
        }
    }
    EvalInstance { run, qrels, visual }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveScores {
    pub p: BTreeMap<String, f64>,
    pub ndcg: BTreeMap<String, Option<f64>>,
    pub mean_p: f64,
    pub mean_ndcg: f64,
}

/// Straight-line reference: per judged topic, walk the run in rank order,
/// skip unjudged and already-seen visual ids, score the first `k` kept.
pub fn naive_scores(inst: &EvalInstance, k: usize) -> NaiveScores {
    let mut p = BTreeMap::new();
    let mut ndcg = BTreeMap::new();
    for (topic, judged) in &inst.qrels.topics {
        let mut rows: Vec<&RunRow> = inst.run.iter().filter(|r| &r.topic_id == topic).collect();
        rows.sort_by_key(|r| r.rank);
        let mut seen = HashSet::new();
        let mut grades = Vec::new();
        for r in rows {
            let vis = inst.visual.get(&r.formula_id).cloned().unwrap_or_else(|| r.formula_id.clone());
            if let Some(&g) = judged.get(&vis) {
                if seen.insert(vis) {
                    grades.push(g);
                }
            }
        }
        grades.truncate(k);
        let relevant = grades.iter().filter(|&&g| g >= 2).count();
        p.insert(topic.clone(), relevant as f64 / k as f64);

        let dcg = |gs: &[u8]| -> f64 {
            let mut s = 0.0;
            for (i, &g) in gs.iter().enumerate() {
                let position = (i + 1) as f64;
                s += (2f64.powi(g as i32) - 1.0) / (position + 1.0).log2();
            }
            s
        };
        let mut ideal: Vec<u8> = judged.values().copied().collect();
        ideal.sort();
        ideal.reverse();
        ideal.truncate(k);
        let idcg = dcg(&ideal);
        ndcg.insert(topic.clone(), if idcg > 0.0 { Some(dcg(&grades) / idcg) } else { None });
    }
    let mean_p = if p.is_empty() { 0.0 } else { p.values().sum::<f64>() / p.len() as f64 };
    let defined: Vec<f64> = ndcg.values().flatten().copied().collect();
    let mean_ndcg = if defined.is_empty() { 0.0 } else { defined.iter().sum::<f64>() / defined.len() as f64 };
    NaiveScores { p, ndcg, mean_p, mean_ndcg }
}

/// Combined reciprocal-rank score of one formula for one topic.
pub fn naive_rrf_score(runs: &[Vec<RunRow>], topic: &str, formula: &str, k_rrf: f64, depth: usize) -> f64 {
    runs.iter()
        .filter_map(|run| {
            run.iter()
                .find(|r| r.topic_id == topic && r.formula_id == formula && r.rank <= depth)
                .map(|r| 1.0 / (k_rrf + r.rank as f64))
        })
        .sum()
}
