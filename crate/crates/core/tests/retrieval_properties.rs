use std::collections::HashMap;

use fsearch_core::retrieval::{search_vectors, stage1_topk, SearchConfig, VectorIndex};
use fsearch_core::semantic::{Provider, SemanticVector};
use fsearch_testkit::ranking::{argsort_by_score, full_sort_topk, random_index, random_parts, random_unit, IndexParts};
use fsearch_testkit::rng;
use proptest::prelude::*;
use rand::Rng;

fn sem(id: &str, v: Vec<f32>) -> SemanticVector {
    SemanticVector {
        formula_id: id.to_string(),
        v,
        provider: Provider::Imported,
        normalized: true,
    }
}

struct Fused {
    parts: IndexParts,
    vectors: HashMap<String, SemanticVector>,
    q: Vec<f32>,
    qs: SemanticVector,
}

/// Index parts plus a semantic vector for most rows; some rows have none.
fn fused_parts(seed: u64, n: usize) -> Fused {
    let mut r = rng(seed);
    let parts = random_parts(&mut r, n, 6);
    let mut vectors = HashMap::new();
    for id in &parts.ids {
        if r.random_bool(0.85) {
            vectors.insert(id.clone(), sem(id, random_unit(&mut r, 4)));
        }
    }
    let q = random_unit(&mut r, 6);
    let qs = sem("query", random_unit(&mut r, 4));
    Fused { parts, vectors, q, qs }
}

fn fused_instance(seed: u64, n: usize) -> (VectorIndex, Vec<f32>, SemanticVector) {
    let f = fused_parts(seed, n);
    (f.parts.build().with_semantic(f.vectors).unwrap(), f.q, f.qs)
}

#[test]
fn stage_one_equals_a_full_sort() {
    let mut r = rng(99);
    for case in 0..200 {
        let n = r.random_range(1..300);
        let dim = r.random_range(1..12);
        let index = random_index(&mut r, n, dim);
        let q = if r.random_bool(0.2) {
            // Query equal to an indexed row: guarantees ties at the top.
            index.row(r.random_range(0..n)).to_vec()
        } else {
            random_unit(&mut r, dim)
        };
        let k = r.random_range(0..n + 5);
        let got = stage1_topk(&q, &index, k).unwrap();
        let want = full_sort_topk(&q, &index, k);
        assert_eq!(got, want, "case {case}: n={n} dim={dim} k={k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lambda_one_is_the_structural_order(seed in any::<u64>(), n in 1usize..120, k in 1usize..150) {
        let (index, q, qs) = fused_instance(seed, n);
        let cfg = SearchConfig { lambda: 1.0, stage1_k: k, final_n: k };
        let got: Vec<String> = search_vectors(&q, Some(&qs), &index, &cfg).unwrap().into_iter().map(|r| r.formula_id).collect();
        let want: Vec<String> = full_sort_topk(&q, &index, k).into_iter().map(|(i, _)| index.id(i).to_string()).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn lambda_zero_is_the_semantic_order_of_the_shortlist(seed in any::<u64>(), n in 1usize..120, k in 1usize..150) {
        let (index, q, qs) = fused_instance(seed, n);
        let cfg = SearchConfig { lambda: 0.0, stage1_k: k, final_n: k };
        let got: Vec<String> = search_vectors(&q, Some(&qs), &index, &cfg).unwrap().into_iter().map(|r| r.formula_id).collect();
        let shortlist: Vec<(String, f64)> = full_sort_topk(&q, &index, k)
            .into_iter()
            .map(|(i, _)| {
                let id = index.id(i).to_string();
                let s = index.semantic(&id).map_or(0.0, |c| qs.cosine(c) as f64);
                (id, s)
            })
            .collect();
        prop_assert_eq!(got, argsort_by_score(&shortlist));
    }

    #[test]
    fn more_semantic_evidence_never_lowers_a_rank(
        seed in any::<u64>(),
        n in 2usize..80,
        lambda in 0.0..1.0f64,
        pick in any::<prop::sample::Index>(),
    ) {
        let Fused { parts, vectors, q, qs } = fused_parts(seed, n);
        let cfg = SearchConfig { lambda, stage1_k: n, final_n: n };
        let index = parts.build().with_semantic(vectors.clone()).unwrap();
        let before = search_vectors(&q, Some(&qs), &index, &cfg).unwrap();
        let target = before[pick.index(before.len())].formula_id.clone();
        let rank_before = before.iter().find(|r| r.formula_id == target).unwrap().rank;

        // Point the target's semantic vector straight at the query.
        let mut vectors = vectors;
        vectors.insert(target.clone(), sem(&target, qs.v.clone()));
        let boosted = parts.build().with_semantic(vectors).unwrap();
        let after = search_vectors(&q, Some(&qs), &boosted, &cfg).unwrap();
        let rank_after = after.iter().find(|r| r.formula_id == target).unwrap().rank;
        prop_assert!(rank_after <= rank_before, "{} -> {}", rank_before, rank_after);
    }

    #[test]
    fn identical_inputs_give_identical_results(seed in any::<u64>(), n in 1usize..200) {
        let (index, q, qs) = fused_instance(seed, n);
        let cfg = SearchConfig { lambda: 0.5, stage1_k: n / 2 + 1, final_n: n / 4 + 1 };
        let a = search_vectors(&q, Some(&qs), &index, &cfg).unwrap();
        let b = search_vectors(&q, Some(&qs), &index, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn missing_query_semantics_reduce_to_scaled_structure() {
    let (index, q, _) = fused_instance(3, 150);
    let cfg = SearchConfig { lambda: 0.3, stage1_k: 150, final_n: 150 };
    let got = search_vectors(&q, None, &index, &cfg).unwrap();
    assert!(got.iter().all(|r| r.s_sem == 0.0));
    let ids: Vec<&str> = got.iter().map(|r| r.formula_id.as_str()).collect();
    let want: Vec<String> = full_sort_topk(&q, &index, 150).into_iter().map(|(i, _)| index.id(i).to_string()).collect();
    assert_eq!(ids, want);
}
