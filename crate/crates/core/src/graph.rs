//! Communicating classes of a finite directed graph.

/// Reachability closure from every vertex (each vertex reaches itself).
pub(crate) fn reachability(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<bool>> {
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|x| (0..n).filter(|&y| y != x && edge(x, y)).collect())
        .collect();
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Strongly connected components ordered by their smallest vertex, each sorted,
/// together with a closed flag (no edge leaves the component).
pub(crate) fn communicating_classes(
    n: usize,
    edge: impl Fn(usize, usize) -> bool,
) -> Vec<(Vec<usize>, bool)> {
    let reach = reachability(n, &edge);
    let mut assigned = vec![false; n];
    let mut out = Vec::new();
    for x in 0..n {
        if assigned[x] {
            continue;
        }
        let class: Vec<usize> = (x..n).filter(|&y| reach[x][y] && reach[y][x]).collect();
        for &y in &class {
            assigned[y] = true;
        }
        let closed = class
            .iter()
            .all(|&u| (0..n).all(|v| u == v || !edge(u, v) || class.contains(&v)));
        out.push((class, closed));
    }
    out
}
