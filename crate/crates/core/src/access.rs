//! Field-access graphs: which field of a constructor a traversal touches
//! right after which other, and how likely that is.
//!
//! The graph of one function is built by walking every root-to-leaf path of
//! its [`Cfg`]. Along a path only the first access to each field counts; each
//! such access adds an edge from the previously accessed field, weighted by
//! the probability of the node where it happens. An edge is
//! [`EdgeKind::DataFlow`] when the later access sits inside a case arm whose
//! scrutinee is computed from the earlier field, and
//! [`EdgeKind::ControlFlow`] otherwise. Edges with the same endpoints and
//! direction are merged by summing weights, and a merged edge is `DataFlow`
//! when any contribution was. A constructor application counts as an access
//! to each of its arguments, in argument order.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cfg::{dot_escape, fmt_weight, Cfg, Payload};
use crate::lang::Name;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    DataFlow,
    ControlFlow,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessEdge {
    pub src: usize,
    pub dst: usize,
    pub weight: BigRational,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldAccessGraph {
    /// Constructor whose fields are the nodes.
    pub dcon: Name,
    /// Number of fields of `dcon`.
    pub n: usize,
    /// Sorted by `(src, dst)`; at most one edge per direction.
    pub edges: Vec<AccessEdge>,
    /// Fields in the order the walk first reached them. Used to break ties
    /// between equally good layouts.
    pub preference: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EdgeJson {
    src: usize,
    dst: usize,
    w_num: i64,
    w_den: i64,
    kind: EdgeKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GraphJson {
    dcon: String,
    n: usize,
    edges: Vec<EdgeJson>,
    #[serde(default)]
    preference: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("weight {0} does not fit the JSON edge format")]
    WeightRange(String),
    #[error("malformed graph: {0}")]
    Malformed(String),
}

struct Walker<'a> {
    g: &'a Cfg,
    dcon: &'a str,
    edges: BTreeMap<(usize, usize), (BigRational, EdgeKind)>,
    preference: Vec<usize>,
}

#[derive(Clone)]
struct PathState {
    last: Option<(usize, Name)>,
    seen: u64,
    field_of: HashMap<Name, usize>,
    /// Variables each variable on this path is computed from.
    derives: HashMap<Name, Vec<Name>>,
    /// Scrutinees of the case arms enclosing the current node.
    guards: Vec<Name>,
}

impl PathState {
    fn derives_from(&self, var: &Name, src: &Name) -> bool {
        var == src || self.derives.get(var).is_some_and(|d| d.contains(src))
    }
}

/// Build the access graph of constructor `dcon` (with `n` fields) for the
/// function whose graph is `g`.
pub fn build_field_access_graph(g: &Cfg, dcon: &str, n: usize) -> FieldAccessGraph {
    let mut w = Walker { g, dcon, edges: BTreeMap::new(), preference: Vec::new() };
    if !g.nodes.is_empty() {
        let st = PathState { last: None, seen: 0, field_of: HashMap::new(), derives: HashMap::new(), guards: Vec::new() };
        w.walk(Cfg::ENTRY, st);
    }
    FieldAccessGraph {
        dcon: dcon.into(),
        n,
        edges: w.edges.into_iter().map(|((src, dst), (weight, kind))| AccessEdge { src, dst, weight, kind }).collect(),
        preference: w.preference,
    }
}

impl Walker<'_> {
    fn walk(&mut self, i: usize, mut st: PathState) {
        let node = &self.g.nodes[i];
        for v in node.payload.free_vars() {
            let Some(&f) = st.field_of.get(v) else { continue };
            if st.seen & (1 << f) != 0 {
                continue;
            }
            st.seen |= 1 << f;
            if !self.preference.contains(&f) {
                self.preference.push(f);
            }
            if let Some((src, src_var)) = &st.last {
                let kind = if st.guards.iter().any(|s| st.derives_from(s, src_var)) {
                    EdgeKind::DataFlow
                } else {
                    EdgeKind::ControlFlow
                };
                let e = self.edges.entry((*src, f)).or_insert((BigRational::zero(), kind));
                e.0 += &node.weight;
                if kind == EdgeKind::DataFlow {
                    e.1 = EdgeKind::DataFlow;
                }
            }
            st.last = Some((f, v.clone()));
        }
        match &node.payload {
            Payload::Terminal(_) => {}
            Payload::Let { var, rhs, .. } => {
                let mut d: Vec<Name> = Vec::new();
                for v in rhs.vars() {
                    d.push(v.clone());
                    if let Some(dv) = st.derives.get(v) {
                        d.extend(dv.iter().cloned());
                    }
                }
                st.derives.insert(var.clone(), d);
                let next = node.succs[0];
                stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.walk(next, st));
            }
            Payload::Case { scrut, arms } => {
                let mut base: Vec<Name> = st.derives.get(scrut).cloned().unwrap_or_default();
                base.push(scrut.clone());
                for ((ctor, binders), &t) in arms.iter().zip(&node.succs) {
                    let mut s = st.clone();
                    for (k, b) in binders.iter().enumerate() {
                        if &**ctor == self.dcon {
                            s.field_of.insert(b.clone(), k);
                        } else {
                            s.field_of.remove(b);
                        }
                        s.derives.insert(b.clone(), base.clone());
                    }
                    s.guards.push(scrut.clone());
                    stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.walk(t, s));
                }
            }
        }
    }
}

/// Merge per-function graphs of the same constructor, scaling each by
/// `1 / graphs.len()`. The merged preference lists fields in the order the
/// graphs (in the given order) first mention them.
pub fn merge_graphs(graphs: &[FieldAccessGraph]) -> Option<FieldAccessGraph> {
    let first = graphs.first()?;
    let scale = BigRational::new(BigInt::from(1), BigInt::from(graphs.len()));
    let mut edges: BTreeMap<(usize, usize), (BigRational, EdgeKind)> = BTreeMap::new();
    let mut preference = Vec::new();
    for g in graphs {
        debug_assert_eq!(g.dcon, first.dcon);
        for e in &g.edges {
            let slot = edges.entry((e.src, e.dst)).or_insert((BigRational::zero(), e.kind));
            slot.0 += &e.weight * &scale;
            if e.kind == EdgeKind::DataFlow {
                slot.1 = EdgeKind::DataFlow;
            }
        }
        for &f in &g.preference {
            if !preference.contains(&f) {
                preference.push(f);
            }
        }
    }
    Some(FieldAccessGraph {
        dcon: first.dcon.clone(),
        n: first.n,
        edges: edges.into_iter().map(|((src, dst), (weight, kind))| AccessEdge { src, dst, weight, kind }).collect(),
        preference,
    })
}

impl FieldAccessGraph {
    pub fn edge(&self, src: usize, dst: usize) -> Option<&AccessEdge> {
        self.edges.iter().find(|e| e.src == src && e.dst == dst)
    }

    /// Fields incident to at least one edge.
    pub fn active(&self) -> Vec<bool> {
        let mut a = vec![false; self.n];
        for e in &self.edges {
            a[e.src] = true;
            a[e.dst] = true;
        }
        a
    }

    /// Graphviz rendering: data-flow edges red, control-flow edges blue,
    /// labelled with their weight to 3 decimals.
    pub fn emit_dot(&self, field_labels: &[String]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"fag_{}\" {{", dot_escape(&self.dcon));
        for i in 0..self.n {
            let label = field_labels.get(i).cloned().unwrap_or_else(|| format!("field {i}"));
            let _ = writeln!(s, "  f{i} [label=\"{}: {}\"];", i, dot_escape(&label));
        }
        for e in &self.edges {
            let color = match e.kind {
                EdgeKind::DataFlow => "red",
                EdgeKind::ControlFlow => "blue",
            };
            let _ = writeln!(s, "  f{} -> f{} [color={color}, label=\"{}\"];", e.src, e.dst, fmt_weight(&e.weight));
        }
        s.push_str("}\n");
        s
    }

    /// JSON with one `{src, dst, w_num, w_den, kind}` object per edge.
    pub fn to_json(&self) -> Result<String, GraphError> {
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let (num, den) = (e.weight.numer().to_i64(), e.weight.denom().to_i64());
                match (num, den) {
                    (Some(w_num), Some(w_den)) => Ok(EdgeJson { src: e.src, dst: e.dst, w_num, w_den, kind: e.kind }),
                    _ => Err(GraphError::WeightRange(e.weight.to_string())),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let j = GraphJson { dcon: self.dcon.to_string(), n: self.n, edges, preference: self.preference.clone() };
        Ok(serde_json::to_string_pretty(&j).expect("graph JSON is serializable"))
    }

    pub fn from_json(s: &str) -> Result<FieldAccessGraph, GraphError> {
        let j: GraphJson = serde_json::from_str(s).map_err(|e| GraphError::Malformed(e.to_string()))?;
        if j.n > crate::lang::MAX_FIELDS {
            return Err(GraphError::Malformed(format!("{} fields exceeds the limit", j.n)));
        }
        let mut edges = BTreeMap::new();
        for e in j.edges {
            if e.src >= j.n || e.dst >= j.n || e.src == e.dst || e.w_den <= 0 || e.w_num < 0 {
                return Err(GraphError::Malformed(format!("bad edge {} -> {}", e.src, e.dst)));
            }
            let w = BigRational::new(e.w_num.into(), e.w_den.into());
            if edges.insert((e.src, e.dst), AccessEdge { src: e.src, dst: e.dst, weight: w, kind: e.kind }).is_some() {
                return Err(GraphError::Malformed(format!("duplicate edge {} -> {}", e.src, e.dst)));
            }
        }
        if j.preference.iter().any(|&f| f >= j.n) {
            return Err(GraphError::Malformed("preference mentions an unknown field".into()));
        }
        Ok(FieldAccessGraph { dcon: j.dcon.into(), n: j.n, edges: edges.into_values().collect(), preference: j.preference })
    }
}
