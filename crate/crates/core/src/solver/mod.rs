//! Choosing a field order per constructor from its field-access graph.
//!
//! Each edge `src -> dst` of weight `p` costs `c * p`, where `c` depends on
//! `delta = pos[dst] - pos[src]` (`1`: succ, `> 1`: after, `-1`: pred,
//! `< -1`: before) and on the edge's regime. Data-flow edges, and
//! control-flow edges leaving an inlineable field, use the data-flow regime,
//! which favours `dst` right after `src`. A control-flow edge into an
//! inlineable field from a non-inlineable one uses the inlineable regime,
//! which favours `dst` right before `src`.

mod exact;
mod global;
mod greedy;
mod lp;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

pub use exact::{solve_branch_and_bound, solve_exact, solve_exhaustive};
pub use global::{solve_global, GlobalProblem, Mode};
pub use greedy::solve_greedy;
pub use lp::emit_lp;

use crate::access::{AccessEdge, EdgeKind, FieldAccessGraph};
use crate::attrs::AttrSet;
use crate::lang::{AnnKind, Program};

/// A field order: `order[k]` is the original index of the field placed at
/// position `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayoutAssignment {
    pub dcon: String,
    pub order: Vec<usize>,
}

impl LayoutAssignment {
    pub fn identity(dcon: &str, n: usize) -> LayoutAssignment {
        LayoutAssignment { dcon: dcon.into(), order: (0..n).collect() }
    }

    /// `pos()[i]` is the new position of original field `i`.
    pub fn pos(&self) -> Vec<usize> {
        let mut p = vec![0; self.order.len()];
        for (k, &f) in self.order.iter().enumerate() {
            p[f] = k;
        }
        p
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(k, &f)| k == f)
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.order.len()];
        self.order.iter().all(|&f| f < seen.len() && !std::mem::replace(&mut seen[f], true))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Succ,
    After,
    Pred,
    Before,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::Succ, Relation::After, Relation::Pred, Relation::Before];

    pub fn of_delta(delta: i64) -> Relation {
        match delta {
            1 => Relation::Succ,
            d if d > 1 => Relation::After,
            -1 => Relation::Pred,
            _ => Relation::Before,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Relation::Succ => "succ",
            Relation::After => "after",
            Relation::Pred => "pred",
            Relation::Before => "before",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    DataFlow,
    Inlineable,
}

/// Cost constants of one regime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegimeCosts {
    pub succ: BigRational,
    pub after: BigRational,
    pub pred: BigRational,
    pub before: BigRational,
}

impl RegimeCosts {
    fn from_ints(succ: i64, after: i64, pred: i64, before: i64) -> RegimeCosts {
        let r = |x: i64| BigRational::from_integer(BigInt::from(x));
        RegimeCosts { succ: r(succ), after: r(after), pred: r(pred), before: r(before) }
    }

    pub fn get(&self, rel: Relation) -> &BigRational {
        match rel {
            Relation::Succ => &self.succ,
            Relation::After => &self.after,
            Relation::Pred => &self.pred,
            Relation::Before => &self.before,
        }
    }

    fn scaled(&self, k: &BigRational) -> RegimeCosts {
        RegimeCosts { succ: &self.succ * k, after: &self.after * k, pred: &self.pred * k, before: &self.before * k }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostParams {
    pub df: RegimeCosts,
    pub inl: RegimeCosts,
}

impl Default for CostParams {
    /// Data-flow `(succ, after, pred, before) = (1, 2, 4, 8)`; inlineable
    /// `(pred, before, succ, after) = (1, 2, 4, 8)`.
    fn default() -> CostParams {
        CostParams { df: RegimeCosts::from_ints(1, 2, 4, 8), inl: RegimeCosts::from_ints(4, 8, 1, 2) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CostConfigError {
    #[error("cost config is not valid JSON: {0}")]
    Syntax(String),
    #[error("cost `{0}` is not a rational number")]
    NotRational(String),
    #[error("cost `{0}` is negative")]
    Negative(String),
    #[error("data-flow costs must satisfy succ < after < pred < before")]
    DataFlowOrder,
    #[error("inlineable costs must satisfy pred < before < succ < after")]
    InlineableOrder,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegimeJson {
    succ: serde_json::Value,
    after: serde_json::Value,
    pred: serde_json::Value,
    before: serde_json::Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CostJson {
    df: RegimeJson,
    inl: RegimeJson,
}

/// Parse `"3"`, `"3/4"`, `"0.75"` or a JSON number exactly.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let (n, d): (BigInt, BigInt) = (n.trim().parse().ok()?, d.trim().parse().ok()?);
        return (!d.is_zero()).then(|| BigRational::new(n, d));
    }
    if let Some((i, f)) = s.split_once('.') {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let neg = i.starts_with('-');
        let whole: BigInt = if i.is_empty() || i == "-" { BigInt::zero() } else { i.parse().ok()? };
        let den = BigInt::from(10).pow(f.len() as u32);
        let frac = BigRational::new(f.parse().ok()?, den);
        let w = BigRational::from_integer(whole.abs());
        let v = w + frac;
        return Some(if neg { -v } else { v });
    }
    Some(BigRational::from_integer(s.parse().ok()?))
}

fn json_rational(field: &str, v: &serde_json::Value) -> Result<BigRational, CostConfigError> {
    let text = match v {
        serde_json::Value::Number(n) => n.to_string(),
        serde_json::Value::String(s) => s.clone(),
        _ => return Err(CostConfigError::NotRational(field.into())),
    };
    let r = parse_rational(&text).ok_or_else(|| CostConfigError::NotRational(field.into()))?;
    if r.is_negative() {
        return Err(CostConfigError::Negative(field.into()));
    }
    Ok(r)
}

impl CostParams {
    /// Check the orderings both regimes must satisfy.
    pub fn validate(&self) -> Result<(), CostConfigError> {
        let d = &self.df;
        if !(d.succ < d.after && d.after < d.pred && d.pred < d.before) {
            return Err(CostConfigError::DataFlowOrder);
        }
        let i = &self.inl;
        if !(i.pred < i.before && i.before < i.succ && i.succ < i.after) {
            return Err(CostConfigError::InlineableOrder);
        }
        for r in [d, i] {
            for rel in Relation::ALL {
                if r.get(rel).is_negative() {
                    return Err(CostConfigError::Negative(rel.name().into()));
                }
            }
        }
        Ok(())
    }

    /// Parse and validate a JSON cost configuration of the form
    /// `{"df": {"succ":..,"after":..,"pred":..,"before":..}, "inl": {..}}`.
    pub fn from_json(s: &str) -> Result<CostParams, CostConfigError> {
        let j: CostJson = serde_json::from_str(s).map_err(|e| CostConfigError::Syntax(e.to_string()))?;
        let conv = |prefix: &str, r: &RegimeJson| -> Result<RegimeCosts, CostConfigError> {
            Ok(RegimeCosts {
                succ: json_rational(&format!("{prefix}.succ"), &r.succ)?,
                after: json_rational(&format!("{prefix}.after"), &r.after)?,
                pred: json_rational(&format!("{prefix}.pred"), &r.pred)?,
                before: json_rational(&format!("{prefix}.before"), &r.before)?,
            })
        };
        let p = CostParams { df: conv("df", &j.df)?, inl: conv("inl", &j.inl)? };
        p.validate()?;
        Ok(p)
    }

    /// Every constant multiplied by `k`.
    pub fn scaled(&self, k: &BigRational) -> CostParams {
        CostParams { df: self.df.scaled(k), inl: self.inl.scaled(k) }
    }

    pub fn regime(&self, r: Regime) -> &RegimeCosts {
        match r {
            Regime::DataFlow => &self.df,
            Regime::Inlineable => &self.inl,
        }
    }
}

/// Regime of an edge given the attributes of the constructor's fields.
pub fn regime(edge: &AccessEdge, attrs: &[AttrSet]) -> Regime {
    let inl = |i: usize| attrs.get(i).is_some_and(|a| a.is_inlineable());
    match edge.kind {
        EdgeKind::DataFlow => Regime::DataFlow,
        EdgeKind::ControlFlow if inl(edge.src) => Regime::DataFlow,
        EdgeKind::ControlFlow if inl(edge.dst) => Regime::Inlineable,
        EdgeKind::ControlFlow => Regime::DataFlow,
    }
}

/// Cost of one edge when its endpoints end up `delta` positions apart.
pub fn edge_cost(delta: i64, edge: &AccessEdge, attrs: &[AttrSet], params: &CostParams) -> BigRational {
    params.regime(regime(edge, attrs)).get(Relation::of_delta(delta)) * &edge.weight
}

/// Total cost of a layout.
pub fn layout_cost(a: &LayoutAssignment, g: &FieldAccessGraph, attrs: &[AttrSet], params: &CostParams) -> BigRational {
    let pos = a.pos();
    g.edges
        .iter()
        .map(|e| edge_cost(pos[e.dst] as i64 - pos[e.src] as i64, e, attrs, params))
        .fold(BigRational::zero(), |acc, c| acc + c)
}

/// User layout constraint on one constructor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// `after` is placed after `before`; immediately after when `adjacent`.
    Relative { after: usize, before: usize, adjacent: bool },
    /// `field` is placed at `pos`.
    Absolute { field: usize, pos: usize },
}

impl Constraint {
    pub fn holds(&self, pos: &[usize]) -> bool {
        match *self {
            Constraint::Relative { after, before, adjacent } => {
                pos[after] > pos[before] && (!adjacent || pos[after] == pos[before] + 1)
            }
            Constraint::Absolute { field, pos: p } => pos[field] == p,
        }
    }

    fn fields(&self) -> Vec<usize> {
        match *self {
            Constraint::Relative { after, before, .. } => vec![after, before],
            Constraint::Absolute { field, .. } => vec![field],
        }
    }

    fn in_range(&self, n: usize) -> bool {
        match *self {
            Constraint::Relative { after, before, .. } => after < n && before < n && after != before,
            Constraint::Absolute { field, pos } => field < n && pos < n,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Relative { after, before, adjacent: false } => write!(f, "field {after} AFTER field {before}"),
            Constraint::Relative { after, before, adjacent: true } => {
                write!(f, "field {after} IMMEDIATELY AFTER field {before}")
            }
            Constraint::Absolute { field, pos } => write!(f, "field {field} AT {pos}"),
        }
    }
}

/// Layout constraints declared by annotations, grouped by constructor.
pub fn constraints_from_annotations(p: &Program) -> std::collections::BTreeMap<String, Vec<Constraint>> {
    let mut out: std::collections::BTreeMap<String, Vec<Constraint>> = Default::default();
    for a in &p.anns {
        let c = match &a.kind {
            AnnKind::After { field, before, adjacent } => match (field.index(), before.index()) {
                (Some(f), Some(b)) => Constraint::Relative { after: f, before: b, adjacent: *adjacent },
                _ => continue,
            },
            AnnKind::At { field, at } => match field.index() {
                Some(f) => Constraint::Absolute { field: f, pos: *at },
                None => continue,
            },
        };
        out.entry(a.ctor.to_string()).or_default().push(c);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("constraints on `{dcon}` conflict: {a} and {b}")]
    Conflict { dcon: String, a: Constraint, b: Constraint },
    #[error("constraint on `{dcon}` cannot be met: {c}")]
    Unsatisfiable { dcon: String, c: Constraint },
    #[error("constraints on `{dcon}` are jointly unsatisfiable: {all}")]
    Jointly { dcon: String, all: String },
    #[error("cost magnitudes of `{0}` exceed the solver's integer range")]
    Overflow(String),
}

/// An optimal layout and its cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub layout: LayoutAssignment,
    pub cost: BigRational,
}

/// Rank of each field for tie-breaking: the graph's preference first, then
/// the remaining fields in declaration order.
pub(crate) fn tie_ranks(g: &FieldAccessGraph) -> Vec<usize> {
    let mut seq: Vec<usize> = g.preference.iter().copied().filter(|&f| f < g.n).collect();
    for f in 0..g.n {
        if !seq.contains(&f) {
            seq.push(f);
        }
    }
    seq
}

/// Find which constraints make the set unsatisfiable.
pub(crate) fn explain_conflict(dcon: &str, n: usize, cs: &[Constraint]) -> SolveError {
    for c in cs {
        if !c.in_range(n) || !feasible_small(n, std::slice::from_ref(c)) {
            return SolveError::Unsatisfiable { dcon: dcon.into(), c: c.clone() };
        }
    }
    for i in 0..cs.len() {
        for j in i + 1..cs.len() {
            if !feasible_small(n, &[cs[i].clone(), cs[j].clone()]) {
                return SolveError::Conflict { dcon: dcon.into(), a: cs[i].clone(), b: cs[j].clone() };
            }
        }
    }
    let all: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
    SolveError::Jointly { dcon: dcon.into(), all: all.join("; ") }
}

/// Feasibility of a few constraints, by enumerating positions of the fields
/// they mention.
fn feasible_small(n: usize, cs: &[Constraint]) -> bool {
    let mut fields: Vec<usize> = cs.iter().flat_map(|c| c.fields()).collect();
    fields.sort_unstable();
    fields.dedup();
    let mut pos = vec![usize::MAX; n];
    fn go(k: usize, fields: &[usize], n: usize, pos: &mut Vec<usize>, cs: &[Constraint]) -> bool {
        if k == fields.len() {
            return cs.iter().all(|c| c.holds(pos));
        }
        for p in 0..n {
            if pos.contains(&p) {
                continue;
            }
            pos[fields[k]] = p;
            if go(k + 1, fields, n, pos, cs) {
                return true;
            }
            pos[fields[k]] = usize::MAX;
        }
        false
    }
    go(0, &fields, n, &mut pos, cs)
}

/// Edge costs scaled to a common integer denominator.
pub(crate) struct Prepared {
    /// `(src, dst, [succ, after, pred, before])`.
    pub edges: Vec<(usize, usize, [i128; 4])>,
    pub denom: BigInt,
}

pub(crate) fn prepare(g: &FieldAccessGraph, attrs: &[AttrSet], params: &CostParams) -> Result<Prepared, SolveError> {
    let rats: Vec<(usize, usize, [BigRational; 4])> = g
        .edges
        .iter()
        .map(|e| {
            let r = params.regime(regime(e, attrs));
            (e.src, e.dst, Relation::ALL.map(|rel| r.get(rel) * &e.weight))
        })
        .collect();
    let mut denom = BigInt::from(1);
    for (_, _, cs) in &rats {
        for c in cs {
            denom = num_integer::Integer::lcm(&denom, c.denom());
        }
    }
    let edges = rats
        .into_iter()
        .map(|(s, d, cs)| {
            let mut out = [0i128; 4];
            for (o, c) in out.iter_mut().zip(cs) {
                let v = (c * BigRational::from_integer(denom.clone())).to_integer();
                *o = i128::try_from(v).map_err(|_| SolveError::Overflow(g.dcon.to_string()))?;
            }
            Ok((s, d, out))
        })
        .collect::<Result<Vec<_>, SolveError>>()?;
    // Sums over all edges must fit as well.
    let worst: Option<i128> = edges.iter().try_fold(0i128, |acc, (_, _, c)| acc.checked_add(*c.iter().max().unwrap()));
    if worst.is_none() {
        return Err(SolveError::Overflow(g.dcon.to_string()));
    }
    Ok(Prepared { edges, denom })
}

impl Prepared {
    pub fn cost_of(&self, pos: &[usize]) -> i128 {
        self.edges
            .iter()
            .map(|(s, d, c)| {
                let i = match Relation::of_delta(pos[*d] as i64 - pos[*s] as i64) {
                    Relation::Succ => 0,
                    Relation::After => 1,
                    Relation::Pred => 2,
                    Relation::Before => 3,
                };
                c[i]
            })
            .sum()
    }

    pub fn to_rational(&self, c: i128) -> BigRational {
        BigRational::new(BigInt::from(c), self.denom.clone())
    }
}
