//! Exact minimization of layout cost.
//!
//! Among optimal layouts the one whose order is lexicographically smallest
//! under the tie ranks wins. Both searches visit candidates in exactly that
//! order and only replace the incumbent on strict improvement.

use super::{explain_conflict, prepare, tie_ranks, Constraint, CostParams, LayoutAssignment, Prepared, Solution, SolveError};
use crate::access::FieldAccessGraph;
use crate::attrs::AttrSet;

/// Largest field count solved by plain enumeration.
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// Optimal layout of `g`'s constructor subject to `cs`.
pub fn solve_exact(g: &FieldAccessGraph, attrs: &[AttrSet], params: &CostParams, cs: &[Constraint]) -> Result<Solution, SolveError> {
    if g.n <= EXHAUSTIVE_LIMIT {
        solve_exhaustive(g, attrs, params, cs)
    } else {
        solve_branch_and_bound(g, attrs, params, cs)
    }
}

fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

fn finish(g: &FieldAccessGraph, prep: &Prepared, best: Option<(i128, Vec<usize>)>, cs: &[Constraint]) -> Result<Solution, SolveError> {
    match best {
        Some((c, order)) => Ok(Solution { layout: LayoutAssignment { dcon: g.dcon.to_string(), order }, cost: prep.to_rational(c) }),
        None => Err(explain_conflict(&g.dcon, g.n, cs)),
    }
}

/// Enumerate all `n!` orders.
pub fn solve_exhaustive(g: &FieldAccessGraph, attrs: &[AttrSet], params: &CostParams, cs: &[Constraint]) -> Result<Solution, SolveError> {
    let prep = prepare(g, attrs, params)?;
    let ranks = tie_ranks(g);
    if cs.iter().any(|c| !c.in_range(g.n)) {
        return Err(explain_conflict(&g.dcon, g.n, cs));
    }
    let mut idx: Vec<usize> = (0..g.n).collect();
    let mut pos = vec![0; g.n];
    let mut best: Option<(i128, Vec<usize>)> = None;
    loop {
        let order: Vec<usize> = idx.iter().map(|&i| ranks[i]).collect();
        for (k, &f) in order.iter().enumerate() {
            pos[f] = k;
        }
        if cs.iter().all(|c| c.holds(&pos)) {
            let c = prep.cost_of(&pos);
            if best.as_ref().is_none_or(|(b, _)| c < *b) {
                best = Some((c, order));
            }
        }
        if !next_permutation(&mut idx) {
            break;
        }
    }
    finish(g, &prep, best, cs)
}

struct Search<'a> {
    prep: &'a Prepared,
    ranks: &'a [usize],
    cs: &'a [Constraint],
    /// False for a pure feasibility search.
    costed: bool,
    order: Vec<usize>,
    pos: Vec<usize>,
    best: Option<(i128, Vec<usize>)>,
}

const UNPLACED: usize = usize::MAX;

impl Search<'_> {
    /// No completion of the current prefix can satisfy `c`.
    fn violated(&self, c: &Constraint) -> bool {
        let k = self.order.len();
        match *c {
            Constraint::Absolute { field, pos } => {
                (self.pos[field] != UNPLACED && self.pos[field] != pos) || (pos < k && self.order[pos] != field)
            }
            Constraint::Relative { after, before, adjacent } => {
                let (pa, pb) = (self.pos[after], self.pos[before]);
                if pa != UNPLACED && pb == UNPLACED {
                    return true;
                }
                if pa != UNPLACED {
                    return !c.holds(&self.pos);
                }
                adjacent && pb != UNPLACED && pb + 1 < k
            }
        }
    }

    /// Admissible bound on the cost of any completion.
    fn lower_bound(&self) -> i128 {
        let k = self.order.len();
        let mut lb = 0;
        for (s, d, c) in &self.prep.edges {
            let (ps, pd) = (self.pos[*s], self.pos[*d]);
            lb += match (ps != UNPLACED, pd != UNPLACED) {
                (true, true) => {
                    let delta = pd as i64 - ps as i64;
                    c[match delta {
                        1 => 0,
                        d if d > 1 => 1,
                        -1 => 2,
                        _ => 3,
                    }]
                }
                (true, false) if k == ps + 1 => c[0].min(c[1]),
                (true, false) => c[1],
                (false, true) if k == pd + 1 => c[2].min(c[3]),
                (false, true) => c[3],
                (false, false) => *c.iter().min().unwrap(),
            };
        }
        lb
    }

    fn dfs(&mut self) {
        let n = self.pos.len();
        if self.costed {
            if let Some((b, _)) = &self.best {
                if self.lower_bound() >= *b {
                    return;
                }
            }
        } else if self.best.is_some() {
            return;
        }
        if self.order.len() == n {
            let c = if self.costed { self.prep.cost_of(&self.pos) } else { 0 };
            self.best = Some((c, self.order.clone()));
            return;
        }
        for &f in self.ranks {
            if self.pos[f] != UNPLACED {
                continue;
            }
            self.pos[f] = self.order.len();
            self.order.push(f);
            if !self.cs.iter().any(|c| self.violated(c)) {
                stacker::maybe_grow(32 * 1024, 256 * 1024, || self.dfs());
            }
            self.order.pop();
            self.pos[f] = UNPLACED;
        }
    }
}

/// Depth-first branch and bound over positions, in tie-rank order.
pub fn solve_branch_and_bound(g: &FieldAccessGraph, attrs: &[AttrSet], params: &CostParams, cs: &[Constraint]) -> Result<Solution, SolveError> {
    let prep = prepare(g, attrs, params)?;
    let ranks = tie_ranks(g);
    if cs.iter().any(|c| !c.in_range(g.n)) {
        return Err(explain_conflict(&g.dcon, g.n, cs));
    }
    let mut s = Search { prep: &prep, ranks: &ranks, cs, costed: true, order: vec![], pos: vec![UNPLACED; g.n], best: None };
    s.dfs();
    let best = s.best;
    finish(g, &prep, best, cs)
}

/// First order satisfying `cs`, searching lexicographically under `ranks`.
pub(crate) fn first_feasible(dcon: &str, ranks: &[usize], cs: &[Constraint]) -> Result<Vec<usize>, SolveError> {
    let n = ranks.len();
    if cs.iter().any(|c| !c.in_range(n)) {
        return Err(explain_conflict(dcon, n, cs));
    }
    let prep = Prepared { edges: vec![], denom: 1.into() };
    let mut s = Search { prep: &prep, ranks, cs, costed: false, order: vec![], pos: vec![UNPLACED; n], best: None };
    s.dfs();
    s.best.map(|(_, o)| o).ok_or_else(|| explain_conflict(dcon, n, cs))
}
