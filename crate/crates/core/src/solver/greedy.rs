use super::LayoutAssignment;
use crate::access::FieldAccessGraph;

/// Heaviest-successor walk.
///
/// Starts at the smallest field that has edges but no incoming edge (or the
/// smallest field with edges, when every such field has an incoming edge),
/// then repeatedly moves to the unvisited successor of largest weight, ties
/// going to the smaller field. Unvisited fields follow in declaration order.
pub fn solve_greedy(g: &FieldAccessGraph) -> LayoutAssignment {
    let active = g.active();
    let mut has_in = vec![false; g.n];
    for e in &g.edges {
        has_in[e.dst] = true;
    }
    let root = (0..g.n).find(|&f| active[f] && !has_in[f]).or_else(|| (0..g.n).find(|&f| active[f]));
    let mut visited = vec![false; g.n];
    let mut order = Vec::with_capacity(g.n);
    let mut cur = root;
    while let Some(f) = cur {
        visited[f] = true;
        order.push(f);
        cur = None;
        let mut best: Option<&crate::access::AccessEdge> = None;
        for e in g.edges.iter().filter(|e| e.src == f && !visited[e.dst]) {
            if best.is_none_or(|b| e.weight > b.weight || (e.weight == b.weight && e.dst < b.dst)) {
                best = Some(e);
            }
        }
        if let Some(e) = best {
            cur = Some(e.dst);
        }
    }
    order.extend((0..g.n).filter(|&f| !visited[f]));
    LayoutAssignment { dcon: g.dcon.to_string(), order }
}
