use std::time::{Duration, Instant};

use fsearch_core::augment::{augment_pair, augment_view, is_wildcard, AugmentConfig, MASK_TOKEN};
use fsearch_core::formula_ir::{opt_to_opg, OpgGraph, OptTree};
use fsearch_testkit::dag::check_single_rooted_dag;
use fsearch_testkit::rng;
use fsearch_testkit::trees::{arb_tree, random_tree};
use proptest::prelude::*;

fn cfg(p1: f64, p2: f64, p3: f64, mask_rate: f64) -> AugmentConfig {
    AugmentConfig {
        p1,
        p2,
        p3,
        mask_rate,
        rng_seed: 0,
    }
}

#[test]
fn ten_thousand_default_augmentations_are_valid() {
    let mut r = rng(11);
    let aug = AugmentConfig::default();
    for i in 0..10_000 {
        let g = opt_to_opg(&random_tree(&mut r, 30));
        let v = augment_view(&g, &aug, &mut r);
        if let Err(e) = check_single_rooted_dag(&v.graph) {
            panic!("augmentation {i}: {e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn heavy_augmentation_stays_valid(
        t in arb_tree(24),
        p1 in 0.0..=1.0f64,
        p2 in 0.0..=1.0f64,
        p3 in 0.0..=1.0f64,
        mask in 0.0..=1.0f64,
        seed in any::<u64>(),
    ) {
        let g = opt_to_opg(&t);
        let (a, b) = augment_pair(&g, &cfg(p1, p2, p3, mask), &mut rng(seed));
        prop_assert_eq!(check_single_rooted_dag(&a.graph), Ok(()));
        prop_assert_eq!(check_single_rooted_dag(&b.graph), Ok(()));
    }

    #[test]
    fn substitution_never_grows_the_graph(
        t in arb_tree(24),
        p1 in 0.0..=1.0f64,
        p2 in 0.0..=1.0f64,
        p3 in 0.0..=1.0f64,
        seed in any::<u64>(),
    ) {
        let g = opt_to_opg(&t);
        let v = augment_view(&g, &cfg(p1, p2, p3, 0.0), &mut rng(seed));
        prop_assert!(v.graph.node_count() <= g.node_count());
        prop_assert!(v.graph.node_count() >= 1);
    }

    #[test]
    fn zero_probabilities_are_the_identity(t in arb_tree(24), seed in any::<u64>()) {
        let g = opt_to_opg(&t);
        let (a, b) = augment_pair(&g, &AugmentConfig::identity(), &mut rng(seed));
        prop_assert_eq!(&a.graph, &g);
        prop_assert_eq!(&b.graph, &g);
        prop_assert!(a.provenance.is_empty() && b.provenance.is_empty());
    }

    #[test]
    fn forced_leaf_substitution_relabels_every_leaf(t in arb_tree(24), seed in any::<u64>()) {
        let g = opt_to_opg(&t);
        let v = augment_view(&g, &cfg(1.0, 0.0, 0.0, 0.0), &mut rng(seed));
        prop_assert_eq!(v.graph.node_count(), g.node_count());
        for n in 0..g.node_count() {
            if g.is_leaf(n) {
                prop_assert!(is_wildcard(v.graph.label(n)), "{}", v.graph.label(n));
            } else {
                prop_assert_eq!(v.graph.label(n), g.label(n));
                prop_assert_eq!(v.graph.children(n), g.children(n));
            }
        }
    }

    #[test]
    fn full_mask_keeps_shape(t in arb_tree(24), seed in any::<u64>()) {
        let g = opt_to_opg(&t);
        let v = augment_view(&g, &cfg(0.0, 0.0, 0.0, 1.0), &mut rng(seed));
        for n in 0..g.node_count() {
            prop_assert_eq!(v.graph.label(n), MASK_TOKEN);
            prop_assert_eq!(v.graph.children(n), g.children(n));
        }
    }
}

/// `(f (f ... (f x)))` with `n` applications: a chain of n + 1 nodes.
fn chain(n: usize) -> OpgGraph {
    let mut t = OptTree::leaf("x");
    for i in 0..n {
        t = OptTree::apply(if i % 2 == 0 { "f" } else { "g" }, vec![t]);
    }
    opt_to_opg(&t)
}

fn time_views(g: &OpgGraph, reps: usize) -> Duration {
    let aug = cfg(0.3, 0.3, 0.3, 0.1);
    let mut best = Duration::MAX;
    for round in 0..5 {
        let mut r = rng(round);
        let start = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(augment_view(g, &aug, &mut r));
        }
        best = best.min(start.elapsed());
    }
    best
}

#[test]
fn cost_grows_linearly_along_chains() {
    let small = chain(2_000);
    let large = chain(4_000);
    let t_small = time_views(&small, 40);
    let t_large = time_views(&large, 40);
    let ratio = t_large.as_secs_f64() / t_small.as_secs_f64();
    // Doubling the chain should about double the time; the bound leaves
    // room for timer noise but rules out quadratic behaviour (ratio 4).
    assert!(ratio < 3.0, "doubling the chain multiplied time by {ratio:.2}");
}
