use std::cmp::Ordering;

use rayon::prelude::*;

use super::index::{QuerySemantics, VectorIndex};
use super::{RetrievalError, SearchConfig};
use crate::encoder::{encode, EncodeMode, ModelParams};
use crate::eval::RunRow;
use crate::formula_ir::{opt_to_opg, parse_formula, FormulaRecord};
use crate::scalar::{dot, normalize_in_place};
use crate::semantic::SemanticVector;

/// Candidates scored per parallel work unit in the stage-1 scan.
const SCAN_BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredResult {
    pub formula_id: String,
    pub post_id: String,
    pub s_struct: f32,
    pub s_sem: f32,
    pub s_final: f64,
    pub rank: usize,
}

/// `λ·s_struct + (1 − λ)·s_sem`.
pub fn fuse(s_struct: f64, s_sem: f64, lambda: f64) -> Result<f64, RetrievalError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(RetrievalError::Config(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok(lambda * s_struct + (1.0 - lambda) * s_sem)
}

/// Exact top-`k` rows by dot product with `q` (a unit vector), as
/// `(row index, score)`. Ties go to the smaller formula id (bytewise).
/// `k` is clamped to the index size.
pub fn stage1_topk(q: &[f32], index: &VectorIndex, k: usize) -> Result<Vec<(usize, f32)>, RetrievalError> {
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let d = index.dim();
    if q.len() != d {
        return Err(RetrievalError::DimensionMismatch {
            expected: d,
            found: q.len(),
        });
    }
    let scores: Vec<f32> = index
        .rows()
        .par_chunks(SCAN_BLOCK * d)
        .flat_map_iter(|block| block.chunks(d).map(|row| dot(q, row)))
        .collect();
    let cmp = |a: &usize, b: &usize| {
        scores[*b]
            .total_cmp(&scores[*a])
            .then_with(|| index.id(*a).as_bytes().cmp(index.id(*b).as_bytes()))
    };
    let mut order: Vec<usize> = (0..index.len()).collect();
    let k = k.min(order.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    Ok(order.into_iter().map(|i| (i, scores[i])).collect())
}

/// Stage 1 over structural vectors, then fusion with semantic cosine on the
/// shortlist. A missing semantic vector on either side scores 0.
pub fn search_vectors(
    q_struct: &[f32],
    q_sem: Option<&SemanticVector>,
    index: &VectorIndex,
    cfg: &SearchConfig,
) -> Result<Vec<ScoredResult>, RetrievalError> {
    cfg.validate()?;
    if let (Some(q), Some(d)) = (q_sem, index.semantic_dim()) {
        if q.dim() != d {
            return Err(RetrievalError::DimensionMismatch {
                expected: d,
                found: q.dim(),
            });
        }
    }
    let shortlist = stage1_topk(q_struct, index, cfg.stage1_k)?;
    let mut scored: Vec<ScoredResult> = shortlist
        .into_iter()
        .map(|(i, s_struct)| {
            let id = index.id(i);
            let s_sem = match (q_sem, index.semantic(id)) {
                (Some(q), Some(c)) => q.cosine(c),
                _ => 0.0,
            };
            Ok(ScoredResult {
                formula_id: id.to_string(),
                post_id: index.post_id(i).to_string(),
                s_struct,
                s_sem,
                s_final: fuse(s_struct as f64, s_sem as f64, cfg.lambda)?,
                rank: 0,
            })
        })
        .collect::<Result<_, RetrievalError>>()?;
    scored.sort_by(|a, b| match b.s_final.total_cmp(&a.s_final) {
        Ordering::Equal => a.formula_id.as_bytes().cmp(b.formula_id.as_bytes()),
        o => o,
    });
    scored.truncate(cfg.final_n);
    for (i, r) in scored.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(scored)
}

/// Unit structural vector (pooled, before the projection head) of a formula.
pub fn embed_query(source: &str, params: &ModelParams<f32>) -> Result<Vec<f32>, RetrievalError> {
    let g = opt_to_opg(&parse_formula(source)?);
    let mut h = encode(&g, params, EncodeMode::Inference)?.h;
    normalize_in_place(&mut h);
    Ok(h)
}

pub fn search(
    query: &FormulaRecord,
    params: &ModelParams<f32>,
    index: &VectorIndex,
    cfg: &SearchConfig,
    semantics: &QuerySemantics,
) -> Result<Vec<ScoredResult>, RetrievalError> {
    let q = embed_query(&query.source_text, params)?;
    let sem = semantics.vector_for(query)?;
    search_vectors(&q, sem.as_ref(), index, cfg)
}

#[derive(Debug, Default)]
pub struct BatchOutcome {
    /// Rows grouped by topic in input order, ranks restarting at 1.
    pub rows: Vec<RunRow>,
    /// Topics that failed, with the reason. They contribute no rows.
    pub failures: Vec<(String, RetrievalError)>,
}

/// Runs every topic (in parallel); a failing topic is recorded, not fatal.
pub fn batch_search(
    topics: &[FormulaRecord],
    params: &ModelParams<f32>,
    index: &VectorIndex,
    cfg: &SearchConfig,
    semantics: &QuerySemantics,
    run_tag: &str,
) -> BatchOutcome {
    let results: Vec<Result<Vec<ScoredResult>, RetrievalError>> = topics
        .par_iter()
        .map(|t| search(t, params, index, cfg, semantics))
        .collect();
    let mut out = BatchOutcome::default();
    for (t, res) in topics.iter().zip(results) {
        match res {
            Ok(list) => out.rows.extend(list.into_iter().map(|r| RunRow {
                topic_id: t.formula_id.clone(),
                formula_id: r.formula_id,
                post_id: r.post_id,
                rank: r.rank,
                score: r.s_final,
                run_tag: run_tag.to_string(),
            })),
            Err(e) => out.failures.push((t.formula_id.clone(), e)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::Provider;
    use std::collections::HashMap;

    fn unit(v: &[f32]) -> Vec<f32> {
        let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    fn sem(id: &str, v: &[f32]) -> SemanticVector {
        SemanticVector {
            formula_id: id.into(),
            v: unit(v),
            provider: Provider::Imported,
            normalized: true,
        }
    }

    fn index(rows: &[(&str, Vec<f32>)]) -> VectorIndex {
        let ids = rows.iter().map(|r| r.0.to_string()).collect::<Vec<_>>();
        let posts = rows.iter().map(|r| format!("p{}", r.0)).collect();
        let dim = rows[0].1.len();
        VectorIndex::new(ids, posts, dim, rows.iter().flat_map(|r| r.1.clone()).collect()).unwrap()
    }

    #[test]
    fn fusion_arithmetic() {
        assert!((fuse(0.8, 0.6, 0.5).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(fuse(0.8, 0.6, 1.0).unwrap(), 0.8);
        assert_eq!(fuse(0.8, 0.6, 0.0).unwrap(), 0.6);
        assert!(fuse(0.8, 0.6, 1.5).is_err());
        assert!(fuse(0.8, 0.6, -0.1).is_err());
    }

    #[test]
    fn self_match_ranks_first() {
        let ix = index(&[("a", vec![1.0, 0.0, 0.0]), ("b", vec![0.6, 0.8, 0.0]), ("c", vec![0.0, 0.0, 1.0])]);
        let top = stage1_topk(&[0.6, 0.8, 0.0], &ix, 10).unwrap();
        assert_eq!(top.len(), 3);
        assert_eq!(top[0].0, 1);
        assert!((top[0].1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ties_break_by_id() {
        let ix = index(&[("z", vec![1.0, 0.0]), ("m", vec![1.0, 0.0]), ("a", vec![1.0, 0.0])]);
        let top: Vec<&str> = stage1_topk(&[1.0, 0.0], &ix, 2).unwrap().iter().map(|(i, _)| ix.id(*i)).collect();
        assert_eq!(top, ["a", "m"]);
    }

    #[test]
    fn semantic_evidence_reorders_the_shortlist() {
        // Structural scores 0.9 and 0.8 against q = e1.
        let r1 = vec![0.9, (1.0f32 - 0.81).sqrt()];
        let r2 = vec![0.8, 0.6];
        let ix = index(&[("c1", r1), ("c2", r2)])
            .with_semantic(HashMap::from([
                ("c1".to_string(), sem("c1", &[0.0, 1.0])),
                ("c2".to_string(), sem("c2", &[1.0, 0.0])),
            ]))
            .unwrap();
        let q = sem("q", &[1.0, 0.0]);
        let cfg = SearchConfig {
            lambda: 0.5,
            stage1_k: 10,
            final_n: 10,
        };
        let res = search_vectors(&[1.0, 0.0], Some(&q), &ix, &cfg).unwrap();
        assert_eq!(res[0].formula_id, "c2");
        assert!((res[0].s_final - 0.9).abs() < 1e-6);
        assert!((res[1].s_final - 0.45).abs() < 1e-6);
        assert_eq!((res[0].rank, res[1].rank), (1, 2));
        let structural = search_vectors(&[1.0, 0.0], Some(&q), &ix, &SearchConfig { lambda: 1.0, ..cfg }).unwrap();
        assert_eq!(structural[0].formula_id, "c1");
    }

    #[test]
    fn missing_semantics_score_zero() {
        let ix = index(&[("a", vec![1.0, 0.0])]);
        let q = sem("q", &[1.0]);
        let cfg = SearchConfig {
            lambda: 0.5,
            stage1_k: 1,
            final_n: 1,
        };
        let res = search_vectors(&[1.0, 0.0], Some(&q), &ix, &cfg).unwrap();
        assert_eq!(res[0].s_sem, 0.0);
        assert!((res[0].s_final - 0.5).abs() < 1e-6);
    }

    #[test]
    fn config_and_shape_errors() {
        let ix = index(&[("a", vec![1.0, 0.0])]);
        assert!(matches!(stage1_topk(&[1.0], &ix, 1), Err(RetrievalError::DimensionMismatch { .. })));
        let bad = SearchConfig {
            lambda: 0.5,
            stage1_k: 5,
            final_n: 6,
        };
        assert!(search_vectors(&[1.0, 0.0], None, &ix, &bad).is_err());
        assert!(matches!(
            VectorIndex::new(vec!["a".into(), "a".into()], vec!["p".into(), "p".into()], 1, vec![1.0, 1.0]),
            Err(RetrievalError::DuplicateId(_))
        ));
        let empty = VectorIndex::new(vec![], vec![], 2, vec![]).unwrap();
        assert!(matches!(stage1_topk(&[1.0, 0.0], &empty, 1), Err(RetrievalError::EmptyIndex)));
    }
}
