use fsearch_core::formula_ir::OpgGraph;

/// Independent validity check for an operator graph: child indices in
/// range, exactly one node without parents and that node is the root,
/// no cycles, every node reachable from the root.
pub fn check_single_rooted_dag(g: &OpgGraph) -> Result<(), String> {
    let n = g.node_count();
    if n == 0 {
        return Err("empty graph".into());
    }
    if g.root() >= n {
        return Err(format!("root {} out of range", g.root()));
    }
    let mut indegree = vec![0usize; n];
    for v in 0..n {
        for &c in g.children(v) {
            if c >= n {
                return Err(format!("node {v} has child {c} out of range"));
            }
            indegree[c] += 1;
        }
    }
    let sources: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    if sources != [g.root()] {
        return Err(format!("parentless nodes {sources:?}, root {}", g.root()));
    }
    // Kahn's algorithm from the root visits every node iff the graph is
    // acyclic and fully reachable.
    let mut remaining = indegree;
    let mut stack = vec![g.root()];
    let mut visited = 0;
    while let Some(v) = stack.pop() {
        visited += 1;
        for &c in g.children(v) {
            remaining[c] -= 1;
            if remaining[c] == 0 {
                stack.push(c);
            }
        }
    }
    if visited != n {
        return Err(format!("only {visited} of {n} nodes ordered: cycle or unreachable node"));
    }
    Ok(())
}
