//! Generic graph augmentations kept only for ablation runs: node dropping,
//! edge perturbation and subgraph sampling. They ignore formula semantics
//! but always return a valid single-rooted DAG.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{AugmentedView, Edit, EditKind};
use crate::formula_ir::OpgGraph;

/// Removes each non-root node with probability `rate` (its edges go with
/// it), then prunes whatever became unreachable.
pub fn node_drop<R: Rng + ?Sized>(g: &OpgGraph, rate: f64, rng: &mut R) -> AugmentedView {
    let n = g.node_count();
    let mut dropped = vec![false; n];
    let mut provenance = Vec::new();
    for (v, d) in dropped.iter_mut().enumerate() {
        if v != g.root() && rng.random_bool(rate) {
            *d = true;
            provenance.push(Edit { node: v, kind: EditKind::DropNode });
        }
    }
    let mut out = g.clone();
    for v in 0..n {
        out.children_mut(v).retain(|&c| !dropped[c]);
    }
    AugmentedView {
        graph: out.prune_unreachable(),
        provenance,
    }
}

/// Removes each edge with probability `rate` and adds about as many random
/// forward edges (parent earlier than child in a topological order).
pub fn edge_perturb<R: Rng + ?Sized>(g: &OpgGraph, rate: f64, rng: &mut R) -> AugmentedView {
    let n = g.node_count();
    let mut out = g.clone();
    let mut provenance = Vec::new();
    let mut removed = 0usize;
    for v in 0..n {
        let before = out.children(v).len();
        let keep: Vec<usize> = out
            .children(v)
            .iter()
            .copied()
            .filter(|_| !rng.random_bool(rate))
            .collect();
        if keep.len() != before {
            removed += before - keep.len();
            provenance.push(Edit { node: v, kind: EditKind::PerturbEdge });
        }
        *out.children_mut(v) = keep;
    }
    // Parents precede children in `order`, so edges along it stay acyclic.
    let mut order = g.topo_children_first();
    order.reverse();
    if n > 1 {
        for _ in 0..removed {
            let i = rng.random_range(0..n - 1);
            let j = rng.random_range(i + 1..n);
            let (p, c) = (order[i], order[j]);
            if c != g.root() {
                out.children_mut(p).push(c);
                provenance.push(Edit { node: p, kind: EditKind::PerturbEdge });
            }
        }
    }
    AugmentedView {
        graph: out.prune_unreachable(),
        provenance,
    }
}

/// Keeps a connected sample of roughly `keep_fraction` of the nodes, grown
/// from the root by random expansion.
pub fn subgraph_sample<R: Rng + ?Sized>(g: &OpgGraph, keep_fraction: f64, rng: &mut R) -> AugmentedView {
    let n = g.node_count();
    let target = ((n as f64 * keep_fraction).ceil() as usize).clamp(1, n);
    let mut kept = vec![false; n];
    kept[g.root()] = true;
    let mut count = 1;
    let mut frontier: Vec<usize> = g.children(g.root()).to_vec();
    while count < target && !frontier.is_empty() {
        frontier.shuffle(rng);
        let v = frontier.pop().expect("non-empty");
        if kept[v] {
            continue;
        }
        kept[v] = true;
        count += 1;
        frontier.extend(g.children(v).iter().copied().filter(|&c| !kept[c]));
    }
    let mut out = g.clone();
    let mut provenance = Vec::new();
    for v in 0..n {
        if !kept[v] {
            provenance.push(Edit { node: v, kind: EditKind::Subgraph });
        }
        out.children_mut(v).retain(|&c| kept[c]);
    }
    AugmentedView {
        graph: out.prune_unreachable(),
        provenance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula_ir::{opt_to_opg, parse_opt_sexpr};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ablation_augmentations_stay_valid() {
        let g = opt_to_opg(&parse_opt_sexpr("(= (+ (/ 1 (- a b)) (^ (- a b) 2)) (* c (+ d e)))").unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            node_drop(&g, 0.3, &mut rng).graph.validate().unwrap();
            edge_perturb(&g, 0.3, &mut rng).graph.validate().unwrap();
            subgraph_sample(&g, 0.5, &mut rng).graph.validate().unwrap();
        }
        assert_eq!(node_drop(&g, 0.0, &mut rng).graph, g);
        assert_eq!(subgraph_sample(&g, 1.0, &mut rng).graph.node_count(), g.node_count());
    }
}
