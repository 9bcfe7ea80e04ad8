use std::collections::HashMap;

use fsearch_core::formula_ir::{OpgGraph, OptTree};
use proptest::prelude::*;
use rand::Rng;

/// Small alphabets so that repeated subtrees are common.
pub const OPERATORS: [&str; 5] = ["+", "*", "-", "^", "f"];
pub const OPERANDS: [&str; 4] = ["a", "b", "1", "2"];

/// Random tree with between 1 and `max_nodes` nodes.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize) -> OptTree {
    let n = rng.random_range(1..=max_nodes.max(1));
    grow(rng, n)
}

fn grow<R: Rng>(rng: &mut R, budget: usize) -> OptTree {
    if budget <= 1 {
        return OptTree::leaf(OPERANDS[rng.random_range(0..OPERANDS.len())]);
    }
    let arity = rng.random_range(1..=(budget - 1).min(3));
    let mut rest = budget - 1 - arity;
    let mut sizes = vec![1usize; arity];
    while rest > 0 {
        sizes[rng.random_range(0..arity)] += 1;
        rest -= 1;
    }
    let kids = sizes.into_iter().map(|s| grow(rng, s)).collect();
    OptTree::apply(OPERATORS[rng.random_range(0..OPERATORS.len())], kids)
}

/// Shrinkable tree strategy, at most `max_nodes` nodes.
pub fn arb_tree(max_nodes: usize) -> impl Strategy<Value = OptTree> {
    let leaf = prop::sample::select(OPERANDS.to_vec()).prop_map(OptTree::leaf);
    leaf.prop_recursive(4, max_nodes as u32, 3, |inner| {
        (prop::sample::select(OPERATORS.to_vec()), prop::collection::vec(inner, 1..=3))
            .prop_map(|(op, kids)| OptTree::apply(op, kids))
    })
    .prop_filter("node budget", move |t| t.len() <= max_nodes)
}

/// Written-out form of the subtree at `v`.
pub fn tree_string(t: &OptTree, v: usize) -> String {
    let kids = t.children(v);
    if kids.is_empty() {
        return t.label(v).to_string();
    }
    let inner: Vec<String> = kids.iter().map(|&c| tree_string(t, c)).collect();
    format!("({} {})", t.label(v), inner.join(" "))
}

/// Written-out form of the tree below `v` in a DAG, shared nodes repeated.
pub fn graph_string(g: &OpgGraph, v: usize) -> String {
    let kids = g.children(v);
    if kids.is_empty() {
        return g.label(v).to_string();
    }
    let inner: Vec<String> = kids.iter().map(|&c| graph_string(g, c)).collect();
    format!("({} {})", g.label(v), inner.join(" "))
}

fn same_subtree(t: &OptTree, a: usize, b: usize) -> bool {
    t.label(a) == t.label(b)
        && t.children(a).len() == t.children(b).len()
        && t.children(a).iter().zip(t.children(b)).all(|(&x, &y)| same_subtree(t, x, y))
}

/// Equivalence classes of tree nodes under subtree equality, found by
/// comparing every pair. `class[v]` is the smallest index equal to `v`.
pub fn sharing_classes(t: &OptTree) -> Vec<usize> {
    let n = t.len();
    let mut class: Vec<usize> = (0..n).collect();
    for v in 0..n {
        for u in 0..v {
            if same_subtree(t, u, v) {
                class[v] = class[u];
                break;
            }
        }
    }
    class
}

/// Checks that `g` is exactly the maximally shared form of `t`: one graph
/// node per class of equal subtrees, with matching labels and ordered
/// children, and the same root.
pub fn check_against_sharing_oracle(t: &OptTree, g: &OpgGraph) -> Result<(), String> {
    let class = sharing_classes(t);
    let mut reps: Vec<usize> = class.clone();
    reps.sort_unstable();
    reps.dedup();
    if g.node_count() != reps.len() {
        return Err(format!("{} graph nodes, {} distinct subtrees", g.node_count(), reps.len()));
    }
    let expected: HashMap<String, usize> = reps.iter().map(|&r| (tree_string(t, r), r)).collect();
    let mut seen = HashMap::new();
    for v in 0..g.node_count() {
        let s = graph_string(g, v);
        let Some(&r) = expected.get(&s) else {
            return Err(format!("graph node {v} spells {s}, which is not a subtree of the input"));
        };
        if let Some(w) = seen.insert(s.clone(), v) {
            return Err(format!("graph nodes {w} and {v} both spell {s}"));
        }
        let want: Vec<String> = t.children(r).iter().map(|&c| tree_string(t, c)).collect();
        let got: Vec<String> = g.children(v).iter().map(|&c| graph_string(g, c)).collect();
        if want != got {
            return Err(format!("children of {s}: expected {want:?}, got {got:?}"));
        }
    }
    if graph_string(g, g.root()) != tree_string(t, t.root()) {
        return Err("roots differ".into());
    }
    let edges: usize = reps.iter().map(|&r| t.children(r).len()).sum();
    if g.edge_count() != edges {
        return Err(format!("{} edges, expected {edges}", g.edge_count()));
    }
    Ok(())
}

/// True when some subtree occurs at two different positions.
pub fn has_repeated_subtree(t: &OptTree) -> bool {
    sharing_classes(t).iter().enumerate().any(|(v, &c)| c != v)
}
