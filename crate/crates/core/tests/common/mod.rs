//! Shared test support: random access graphs and a brute-force layout
//! oracle that recomputes costs without the solver's code.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;

use packlay_core::access::{AccessEdge, EdgeKind, FieldAccessGraph};
use packlay_core::attrs::{AttrSet, FieldAttr};
use packlay_core::gen::Rng64;
use packlay_core::solver::{Constraint, CostParams, RegimeCosts};

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// A random graph over `n` fields: each ordered pair gets an edge with
/// probability 2/5, weight in (0, 1], random kind; each field is
/// inlineable with probability 1/4.
pub fn random_graph(rng: &mut Rng64, n: usize) -> (FieldAccessGraph, Vec<AttrSet>) {
    let mut edges = Vec::new();
    for src in 0..n {
        for dst in 0..n {
            if src == dst || !rng.gen_bool(0.4) {
                continue;
            }
            let den = rng.gen_range(1..=16);
            let num = rng.gen_range(1..=den);
            let kind = if rng.gen_bool(0.5) { EdgeKind::DataFlow } else { EdgeKind::ControlFlow };
            edges.push(AccessEdge { src, dst, weight: ratio(num, den), kind });
        }
    }
    let mut active: Vec<usize> =
        (0..n).filter(|&f| edges.iter().any(|e: &AccessEdge| e.src == f || e.dst == f)).collect();
    active.shuffle(rng);
    let attrs = (0..n)
        .map(|_| if rng.gen_bool(0.25) { AttrSet::default().with(FieldAttr::Inlineable) } else { AttrSet::default() })
        .collect();
    (FieldAccessGraph { dcon: "K".into(), n, edges, preference: active }, attrs)
}

/// Random positive costs satisfying both regime orderings: four strictly
/// increasing numerators over one random denominator per table.
pub fn random_params(rng: &mut Rng64) -> CostParams {
    let mut table = || {
        let den = rng.gen_range(1..=6);
        let mut acc = 0;
        let v: Vec<BigRational> = (0..4)
            .map(|_| {
                acc += rng.gen_range(1..=5);
                ratio(acc, den)
            })
            .collect();
        v
    };
    let a = table();
    let b = table();
    CostParams {
        df: RegimeCosts { succ: a[0].clone(), after: a[1].clone(), pred: a[2].clone(), before: a[3].clone() },
        inl: RegimeCosts { pred: b[0].clone(), before: b[1].clone(), succ: b[2].clone(), after: b[3].clone() },
    }
}

/// Cost of placing `e.dst` `delta` slots after `e.src`: rigid edges and
/// edges leaving an inlineable field use the data-flow table, other
/// control-flow edges into an inlineable field the inlineable one.
pub fn oracle_edge_cost(delta: i64, e: &AccessEdge, attrs: &[AttrSet], params: &CostParams) -> BigRational {
    let inl = |f: usize| attrs[f].contains(FieldAttr::Inlineable);
    let table = if e.kind == EdgeKind::ControlFlow && !inl(e.src) && inl(e.dst) { &params.inl } else { &params.df };
    let c = match delta {
        1 => &table.succ,
        d if d >= 2 => &table.after,
        -1 => &table.pred,
        _ => &table.before,
    };
    c * &e.weight
}

/// `order[k]` is the field stored at position `k`.
pub fn oracle_cost(order: &[usize], g: &FieldAccessGraph, attrs: &[AttrSet], params: &CostParams) -> BigRational {
    let mut pos = vec![0usize; order.len()];
    for (k, &f) in order.iter().enumerate() {
        pos[f] = k;
    }
    g.edges.iter().fold(BigRational::zero(), |acc, e| {
        acc + oracle_edge_cost(pos[e.dst] as i64 - pos[e.src] as i64, e, attrs, params)
    })
}

pub fn oracle_holds(order: &[usize], cs: &[Constraint]) -> bool {
    let mut pos = vec![0usize; order.len()];
    for (k, &f) in order.iter().enumerate() {
        pos[f] = k;
    }
    cs.iter().all(|c| match *c {
        Constraint::Relative { after, before, adjacent } => {
            pos[after] > pos[before] && (!adjacent || pos[after] == pos[before] + 1)
        }
        Constraint::Absolute { field, pos: p } => pos[field] == p,
    })
}

/// Every permutation of `0..n`, by recursive insertion.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum cost over all feasible layouts, or `None` if none is feasible.
pub fn brute_force_min(
    g: &FieldAccessGraph,
    attrs: &[AttrSet],
    params: &CostParams,
    cs: &[Constraint],
) -> Option<BigRational> {
    all_permutations(g.n)
        .into_iter()
        .filter(|o| oracle_holds(o, cs))
        .map(|o| oracle_cost(&o, g, attrs, params))
        .min()
}
