use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::opt::{OptTree, TreeBuilder};
use super::IrError;

/// Edge of an operator graph: `parent` applies to `child` as its
/// `arg_position`-th argument (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OpgEdge {
    pub parent: usize,
    pub child: usize,
    pub arg_position: usize,
}

/// Labeled DAG obtained from an operator tree by merging identical subtrees.
///
/// Children of each node are stored in argument order, so the edge list is
/// implied: the `k`-th child of `p` is the edge `(p, child, k)`. Graphs
/// produced by [`opt_to_opg`] are maximally shared; augmented graphs may not
/// be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpgGraph {
    labels: Vec<String>,
    children: Vec<Vec<usize>>,
    root: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpgStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub leaf_count: usize,
    /// Longest root-to-leaf path, in edges.
    pub depth: usize,
}

/// JSON debugging dump: `{"nodes": [...], "edges": [[p, c, pos], ...], "root": r}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpgDump {
    pub nodes: Vec<String>,
    pub edges: Vec<[usize; 3]>,
    pub root: usize,
}

impl OpgGraph {
    /// Builds a graph from labels and ordered child lists, then validates it.
    pub fn from_parts(
        labels: Vec<String>,
        children: Vec<Vec<usize>>,
        root: usize,
    ) -> Result<Self, IrError> {
        let g = OpgGraph {
            labels,
            children,
            root,
        };
        g.validate()?;
        Ok(g)
    }

    #[cfg(test)]
    pub(crate) fn from_parts_unchecked(
        labels: Vec<String>,
        children: Vec<Vec<usize>>,
        root: usize,
    ) -> Self {
        OpgGraph {
            labels,
            children,
            root,
        }
    }

    pub fn single(label: impl Into<String>) -> Self {
        OpgGraph {
            labels: vec![label.into()],
            children: vec![Vec::new()],
            root: 0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.children[v].is_empty()
    }

    pub(crate) fn set_label(&mut self, v: usize, label: String) {
        self.labels[v] = label;
    }

    pub(crate) fn children_mut(&mut self, v: usize) -> &mut Vec<usize> {
        &mut self.children[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = OpgEdge> + '_ {
        self.children.iter().enumerate().flat_map(|(p, kids)| {
            kids.iter().enumerate().map(move |(k, &c)| OpgEdge {
                parent: p,
                child: c,
                arg_position: k,
            })
        })
    }

    /// Nodes reachable from the root, as a membership mask.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.labels.len()];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(v) = stack.pop() {
            for &c in &self.children[v] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Drops nodes not reachable from the root, renumbering the rest in
    /// their original relative order.
    pub fn prune_unreachable(&self) -> OpgGraph {
        let keep = self.reachable();
        if keep.iter().all(|&k| k) {
            return self.clone();
        }
        let mut remap = vec![usize::MAX; keep.len()];
        let mut labels = Vec::new();
        for (v, &k) in keep.iter().enumerate() {
            if k {
                remap[v] = labels.len();
                labels.push(self.labels[v].clone());
            }
        }
        let children = keep
            .iter()
            .enumerate()
            .filter(|(_, &k)| k)
            .map(|(v, _)| self.children[v].iter().map(|&c| remap[c]).collect())
            .collect();
        OpgGraph {
            labels,
            children,
            root: remap[self.root],
        }
    }

    /// Reorders node storage: node `v` moves to position `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<OpgGraph, IrError> {
        let n = self.labels.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(IrError::InvalidGraph("not a permutation".into()));
        }
        let mut labels = vec![String::new(); n];
        let mut children = vec![Vec::new(); n];
        for v in 0..n {
            labels[perm[v]] = self.labels[v].clone();
            children[perm[v]] = self.children[v].iter().map(|&c| perm[c]).collect();
        }
        Ok(OpgGraph {
            labels,
            children,
            root: perm[self.root],
        })
    }

    /// Checks: indices in range, acyclic, the root is the only node with
    /// in-degree 0, and every node is reachable from it.
    pub fn validate(&self) -> Result<(), IrError> {
        let n = self.labels.len();
        let bad = |m: String| Err(IrError::InvalidGraph(m));
        if n == 0 {
            return bad("empty graph".into());
        }
        if self.children.len() != n {
            return bad("children table length mismatch".into());
        }
        if self.root >= n {
            return bad("root out of range".into());
        }
        let mut indeg = vec![0usize; n];
        for kids in &self.children {
            for &c in kids {
                if c >= n {
                    return bad(format!("child index {c} out of range"));
                }
                indeg[c] += 1;
            }
        }
        if indeg[self.root] != 0 {
            return bad("root has incoming edges".into());
        }
        if let Some(v) = (0..n).find(|&v| v != self.root && indeg[v] == 0) {
            return bad(format!("node {v} is a second root"));
        }
        // Kahn's algorithm: all nodes drain iff acyclic.
        let mut queue = vec![self.root];
        let mut drained = 0;
        while let Some(v) = queue.pop() {
            drained += 1;
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
        if drained != n {
            return bad("cycle detected".into());
        }
        Ok(())
    }

    /// True when no two distinct nodes share a label and child sequence.
    pub fn is_maximally_shared(&self) -> bool {
        let mut seen = HashMap::with_capacity(self.labels.len());
        (0..self.labels.len()).all(|v| seen.insert((&self.labels[v], &self.children[v]), v).is_none())
    }

    /// Nodes ordered so every child precedes its parents.
    pub fn topo_children_first(&self) -> Vec<usize> {
        let n = self.labels.len();
        let mut state = vec![0u8; n];
        let mut out = Vec::with_capacity(n);
        let mut stack = vec![(self.root, 0usize)];
        state[self.root] = 1;
        while let Some(top) = stack.last_mut() {
            let v = top.0;
            if let Some(&c) = self.children[v].get(top.1) {
                top.1 += 1;
                if state[c] == 0 {
                    state[c] = 1;
                    stack.push((c, 0));
                }
            } else {
                state[v] = 2;
                out.push(v);
                stack.pop();
            }
        }
        out
    }

    pub fn stats(&self) -> OpgStats {
        let mut depth = vec![0usize; self.labels.len()];
        for v in self.topo_children_first() {
            depth[v] = self.children[v].iter().map(|&c| depth[c] + 1).max().unwrap_or(0);
        }
        OpgStats {
            node_count: self.node_count(),
            edge_count: self.edge_count(),
            leaf_count: self.children.iter().filter(|k| k.is_empty()).count(),
            depth: depth[self.root],
        }
    }

    /// Expands shared nodes back into a tree.
    pub fn unfold(&self) -> OptTree {
        fn go(g: &OpgGraph, v: usize, b: &mut TreeBuilder) -> usize {
            let kids = g.children[v].iter().map(|&c| go(g, c, b)).collect();
            b.push(g.labels[v].clone(), kids)
        }
        let mut b = TreeBuilder::default();
        let root = go(self, self.root, &mut b);
        b.finish(root)
    }

    pub fn to_dump(&self) -> OpgDump {
        OpgDump {
            nodes: self.labels.clone(),
            edges: self.edges().map(|e| [e.parent, e.child, e.arg_position]).collect(),
            root: self.root,
        }
    }

    /// Rebuilds a graph from a dump; edges may be listed in any order but
    /// each parent's positions must be exactly `0..arity`.
    pub fn from_dump(d: &OpgDump) -> Result<OpgGraph, IrError> {
        let n = d.nodes.len();
        let mut slots: Vec<Vec<Option<usize>>> = vec![Vec::new(); n];
        for &[p, c, k] in &d.edges {
            if p >= n || c >= n {
                return Err(IrError::InvalidGraph(format!("edge ({p}, {c}) out of range")));
            }
            let s = &mut slots[p];
            if s.len() <= k {
                s.resize(k + 1, None);
            }
            if s[k].replace(c).is_some() {
                return Err(IrError::InvalidGraph(format!("duplicate position {k} under node {p}")));
            }
        }
        let children = slots
            .into_iter()
            .enumerate()
            .map(|(p, s)| {
                s.into_iter()
                    .collect::<Option<Vec<usize>>>()
                    .ok_or_else(|| IrError::InvalidGraph(format!("gap in argument positions of node {p}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        OpgGraph::from_parts(d.nodes.clone(), children, d.root)
    }
}

/// Converts a tree to its maximally shared graph by bottom-up hash-consing
/// on `(label, ordered child ids)`. Node ids follow first appearance in
/// post-order, so the root is always the last node.
pub fn opt_to_opg(t: &OptTree) -> OpgGraph {
    let mut table: HashMap<(String, Vec<usize>), usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut children: Vec<Vec<usize>> = Vec::new();
    let mut id_of = vec![usize::MAX; t.len()];
    for v in t.post_order() {
        let kids: Vec<usize> = t.children(v).iter().map(|&c| id_of[c]).collect();
        let key = (t.label(v).to_string(), kids);
        let next = labels.len();
        let id = *table.entry(key).or_insert_with_key(|(l, k)| {
            labels.push(l.clone());
            children.push(k.clone());
            next
        });
        id_of[v] = id;
    }
    OpgGraph {
        labels,
        children,
        root: id_of[t.root()],
    }
}
