//! Stochastic views of operator graphs for contrastive training: attribute
//! masking and hierarchical substructure substitution.
//!
//! Substitution works level by level. Leaves are order 1, parents of leaves
//! (all children are leaves) order 2, grandparents of leaves (some child is
//! order 2) order 3. Levels are computed once on the input, edits run from
//! order 3 down to order 1, a selected node gets a fresh `W<n>` wildcard
//! label and loses its outgoing edges, and whatever becomes unreachable
//! from the root is pruned at the end. A shared node is edited once, so
//! every parent sees the same wildcard.

#[cfg(feature = "ablation")]
pub mod ablation;

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula_ir::OpgGraph;

/// Label written over masked nodes.
pub const MASK_TOKEN: &str = "[MASK]";

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    BadProbability { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Order-1 (leaf) substitution probability.
    pub p1: f64,
    /// Order-2 (parent-of-leaf) substitution probability.
    pub p2: f64,
    /// Order-3 (grandparent-of-leaf) substitution probability.
    pub p3: f64,
    pub mask_rate: f64,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            p1: 0.3,
            p2: 0.005,
            p3: 0.002,
            mask_rate: 0.01,
            rng_seed: 0,
        }
    }
}

impl AugmentConfig {
    /// All probabilities zero: augmentation is the identity.
    pub fn identity() -> Self {
        AugmentConfig {
            p1: 0.0,
            p2: 0.0,
            p3: 0.0,
            mask_rate: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        for (name, value) in [
            ("p1", self.p1),
            ("p2", self.p2),
            ("p3", self.p3),
            ("mask_rate", self.mask_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(AugmentError::BadProbability { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EditKind {
    Mask,
    Substitute { order: u8 },
    #[cfg(feature = "ablation")]
    DropNode,
    #[cfg(feature = "ablation")]
    PerturbEdge,
    #[cfg(feature = "ablation")]
    Subgraph,
}

/// One applied edit. `node` indexes the graph the edit was applied to,
/// before any pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edit {
    pub node: usize,
    pub kind: EditKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedView {
    pub graph: OpgGraph,
    pub provenance: Vec<Edit>,
}

impl AugmentedView {
    pub fn unchanged(g: &OpgGraph) -> Self {
        AugmentedView {
            graph: g.clone(),
            provenance: Vec::new(),
        }
    }
}

/// True for labels produced by substitution (`W` followed by digits).
pub fn is_wildcard(label: &str) -> bool {
    label.len() > 1 && label.starts_with('W') && label[1..].bytes().all(|b| b.is_ascii_digit())
}

fn fresh_wildcard<R: Rng + ?Sized>(rng: &mut R, used: &mut HashSet<u32>) -> String {
    loop {
        let n: u32 = rng.random();
        if used.insert(n) {
            return format!("W{n}");
        }
    }
}

/// Replaces each label with [`MASK_TOKEN`] independently with probability
/// `rate`. Topology is untouched.
pub fn attribute_mask<R: Rng + ?Sized>(g: &OpgGraph, rate: f64, rng: &mut R) -> AugmentedView {
    let mut out = g.clone();
    let mut provenance = Vec::new();
    for v in 0..g.node_count() {
        if rng.random_bool(rate) {
            out.set_label(v, MASK_TOKEN.to_string());
            provenance.push(Edit {
                node: v,
                kind: EditKind::Mask,
            });
        }
    }
    AugmentedView {
        graph: out,
        provenance,
    }
}

/// Substitution level of each node on the input graph: 1 leaf,
/// 2 parent-of-leaf, 3 grandparent-of-leaf, 0 otherwise.
pub fn substitution_levels(g: &OpgGraph) -> Vec<u8> {
    let n = g.node_count();
    let mut level: Vec<u8> = (0..n)
        .map(|v| {
            let kids = g.children(v);
            if kids.is_empty() {
                1
            } else if kids.iter().all(|&c| g.is_leaf(c)) {
                2
            } else {
                0
            }
        })
        .collect();
    for v in 0..n {
        if level[v] == 0 && g.children(v).iter().any(|&c| level[c] == 2) {
            level[v] = 3;
        }
    }
    level
}

/// Hierarchical substructure substitution; see the module docs.
pub fn substructure_substitute<R: Rng + ?Sized>(
    g: &OpgGraph,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> AugmentedView {
    let level = substitution_levels(g);
    let mut out = g.clone();
    let mut edited = vec![false; g.node_count()];
    let mut used = HashSet::new();
    let mut provenance = Vec::new();
    for (order, p) in [(3u8, cfg.p3), (2, cfg.p2), (1, cfg.p1)] {
        if p <= 0.0 {
            continue;
        }
        // Nodes cut off by a higher-order edit are not candidates.
        let live = out.reachable();
        for v in 0..g.node_count() {
            if level[v] != order || edited[v] || !live[v] {
                continue;
            }
            if rng.random_bool(p) {
                out.set_label(v, fresh_wildcard(rng, &mut used));
                out.children_mut(v).clear();
                edited[v] = true;
                provenance.push(Edit {
                    node: v,
                    kind: EditKind::Substitute { order },
                });
            }
        }
    }
    let graph = if provenance.iter().any(|e| e.kind != EditKind::Substitute { order: 1 }) {
        out.prune_unreachable()
    } else {
        out
    };
    AugmentedView { graph, provenance }
}

/// One view: substitution followed by masking.
pub fn augment_view<R: Rng + ?Sized>(g: &OpgGraph, cfg: &AugmentConfig, rng: &mut R) -> AugmentedView {
    let sub = substructure_substitute(g, cfg, rng);
    let masked = attribute_mask(&sub.graph, cfg.mask_rate, rng);
    let mut provenance = sub.provenance;
    provenance.extend(masked.provenance);
    AugmentedView {
        graph: masked.graph,
        provenance,
    }
}

/// Two independent views of `g`, drawn sequentially from `rng`.
pub fn augment_pair<R: Rng + ?Sized>(
    g: &OpgGraph,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> (AugmentedView, AugmentedView) {
    let a = augment_view(g, cfg, rng);
    let b = augment_view(g, cfg, rng);
    (a, b)
}
