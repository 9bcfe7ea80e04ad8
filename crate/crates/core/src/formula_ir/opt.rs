use std::fmt;

use super::IrError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Operator,
    Operand,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OptNode {
    pub label: String,
    pub kind: NodeKind,
}

/// Operator tree of a single formula: operators at internal nodes, operands
/// at the leaves, children kept in argument order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptTree {
    nodes: Vec<OptNode>,
    children: Vec<Vec<usize>>,
    root: usize,
}

impl OptTree {
    /// Builds a tree from raw parts, checking every tree invariant.
    pub fn from_parts(
        nodes: Vec<OptNode>,
        children: Vec<Vec<usize>>,
        root: usize,
    ) -> Result<Self, IrError> {
        let t = OptTree {
            nodes,
            children,
            root,
        };
        t.validate()?;
        Ok(t)
    }

    /// Tree with a single operand node.
    pub fn leaf(label: impl Into<String>) -> Self {
        OptTree {
            nodes: vec![OptNode {
                label: label.into(),
                kind: NodeKind::Operand,
            }],
            children: vec![Vec::new()],
            root: 0,
        }
    }

    /// Tree whose root is `label` applied to the given subtrees, in order.
    pub fn apply(label: impl Into<String>, args: Vec<OptTree>) -> Self {
        if args.is_empty() {
            return OptTree::leaf(label);
        }
        let mut b = TreeBuilder::default();
        let kids: Vec<usize> = args.iter().map(|a| b.graft(a, a.root)).collect();
        let root = b.push(label.into(), kids);
        b.finish(root)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, i: usize) -> &OptNode {
        &self.nodes[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.nodes[i].label
    }

    pub fn nodes(&self) -> &[OptNode] {
        &self.nodes
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Node indices in post-order (children before parents, left to right).
    pub fn post_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                out.push(v);
            } else {
                stack.push((v, true));
                for &c in self.children[v].iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    /// Structural equality of the subtrees rooted at `a` in `self` and `b`
    /// in `other`.
    pub fn subtree_eq(&self, a: usize, other: &OptTree, b: usize) -> bool {
        let mut stack = vec![(a, b)];
        while let Some((x, y)) = stack.pop() {
            if self.nodes[x].label != other.nodes[y].label
                || self.children[x].len() != other.children[y].len()
            {
                return false;
            }
            stack.extend(
                self.children[x]
                    .iter()
                    .copied()
                    .zip(other.children[y].iter().copied()),
            );
        }
        true
    }

    /// Canonical s-expression; re-parses to an equal tree.
    pub fn to_sexpr(&self) -> String {
        let mut s = String::new();
        self.write_sexpr(self.root, &mut s);
        s
    }

    fn write_sexpr(&self, v: usize, out: &mut String) {
        if self.children[v].is_empty() {
            out.push_str(&self.nodes[v].label);
            return;
        }
        out.push('(');
        out.push_str(&self.nodes[v].label);
        for &c in &self.children[v] {
            out.push(' ');
            self.write_sexpr(c, out);
        }
        out.push(')');
    }

    fn validate(&self) -> Result<(), IrError> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(IrError::InvalidTree("empty tree".into()));
        }
        if self.children.len() != n {
            return Err(IrError::InvalidTree("children table length mismatch".into()));
        }
        if self.root >= n {
            return Err(IrError::InvalidTree("root out of range".into()));
        }
        let mut parent_count = vec![0usize; n];
        for (v, kids) in self.children.iter().enumerate() {
            let want = if kids.is_empty() {
                NodeKind::Operand
            } else {
                NodeKind::Operator
            };
            if self.nodes[v].kind != want {
                return Err(IrError::InvalidTree(format!(
                    "node {v} kind {:?} inconsistent with {} children",
                    self.nodes[v].kind,
                    kids.len()
                )));
            }
            for &c in kids {
                if c >= n {
                    return Err(IrError::InvalidTree(format!("child index {c} out of range")));
                }
                parent_count[c] += 1;
            }
        }
        for (v, &pc) in parent_count.iter().enumerate() {
            let expected = usize::from(v != self.root);
            if pc != expected {
                return Err(IrError::InvalidTree(format!(
                    "node {v} has {pc} parents, expected {expected}"
                )));
            }
        }
        // Every node has one parent; reachability from the root rules out cycles.
        if self.post_order().len() != n {
            return Err(IrError::InvalidTree("cycle or unreachable node".into()));
        }
        Ok(())
    }
}

impl fmt::Display for OptTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sexpr())
    }
}

/// Incremental builder used by the parsers; nodes are appended bottom-up.
#[derive(Default)]
pub(crate) struct TreeBuilder {
    nodes: Vec<OptNode>,
    children: Vec<Vec<usize>>,
}

impl TreeBuilder {
    pub(crate) fn push(&mut self, label: String, kids: Vec<usize>) -> usize {
        let kind = if kids.is_empty() {
            NodeKind::Operand
        } else {
            NodeKind::Operator
        };
        self.nodes.push(OptNode { label, kind });
        self.children.push(kids);
        self.nodes.len() - 1
    }

    /// Copies the subtree of `t` rooted at `v` into the builder.
    pub(crate) fn graft(&mut self, t: &OptTree, v: usize) -> usize {
        let kids = t.children[v].iter().map(|&c| self.graft(t, c)).collect();
        self.push(t.nodes[v].label.clone(), kids)
    }

    pub(crate) fn finish(self, root: usize) -> OptTree {
        OptTree {
            nodes: self.nodes,
            children: self.children,
            root,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_builds_ordered_children() {
        let t = OptTree::apply("-", vec![OptTree::leaf("a"), OptTree::leaf("b")]);
        assert_eq!(t.to_sexpr(), "(- a b)");
        assert_eq!(t.len(), 3);
        let r = t.root();
        assert_eq!(t.label(t.children(r)[0]), "a");
    }

    #[test]
    fn from_parts_rejects_two_parents() {
        let nodes = vec![
            OptNode { label: "+".into(), kind: NodeKind::Operator },
            OptNode { label: "a".into(), kind: NodeKind::Operand },
        ];
        let err = OptTree::from_parts(nodes, vec![vec![1, 1], vec![]], 0).unwrap_err();
        assert!(matches!(err, IrError::InvalidTree(_)));
    }

    #[test]
    fn from_parts_rejects_operator_without_children() {
        let nodes = vec![OptNode { label: "f".into(), kind: NodeKind::Operator }];
        assert!(OptTree::from_parts(nodes, vec![vec![]], 0).is_err());
    }
}
