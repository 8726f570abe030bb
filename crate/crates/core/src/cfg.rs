//! Weighted control-flow graph of one function body.
//!
//! One node per `let` binding, per `case` scrutinee and per terminal variable
//! reference; case arms have no node of their own. The entry node has weight
//! 1, a `let` passes its weight to its successor, and a `case` with `k` arms
//! gives each arm `1/k` of its own weight. Nodes are numbered in pre-order, so
//! every ancestor has a smaller id than its descendants.

use std::collections::BTreeSet;
use std::fmt::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::lang::{Arg, Expr, FunDef, Name, Rhs, Type};

/// Node identifier: owning function (index into the program's functions) and
/// position within that function's graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub func: usize,
    pub idx: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Let { var: Name, ty: Type, rhs: Rhs },
    Case { scrut: Name, arms: Vec<(Name, Vec<Name>)> },
    Terminal(Name),
}

impl Payload {
    /// Variables read by the node, in argument order.
    pub fn free_vars(&self) -> Vec<&Name> {
        match self {
            Payload::Let { rhs, .. } => rhs.vars(),
            Payload::Case { scrut, .. } => vec![scrut],
            Payload::Terminal(v) => vec![v],
        }
    }

    fn summary(&self) -> String {
        match self {
            Payload::Let { var, rhs, .. } => format!("{var} = {}", crate::lang::pretty_rhs(rhs)),
            Payload::Case { scrut, .. } => format!("case {scrut}"),
            Payload::Terminal(v) => format!("ret {v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfgNode {
    pub payload: Payload,
    /// Probability of reaching this node from the entry.
    pub weight: BigRational,
    /// Successors; a `case` lists one per arm, in arm order.
    pub succs: Vec<usize>,
    /// Innermost enclosing `case` node, if any.
    pub parent_case: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cfg {
    pub func: usize,
    pub name: Name,
    pub nodes: Vec<CfgNode>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CfgError {
    #[error("`{0}` is not in A-normal form; normalize it first")]
    NotAnf(Name),
}

/// Build the graph of function number `func` with definition `f`.
pub fn build_cfg(func: usize, f: &FunDef) -> Result<Cfg, CfgError> {
    build_cfg_expr(func, f.name.clone(), &f.body)
}

pub fn build_cfg_expr(func: usize, name: Name, body: &Expr) -> Result<Cfg, CfgError> {
    let mut g = Cfg { func, name, nodes: Vec::new() };
    g.walk(body, BigRational::one(), None)?;
    Ok(g)
}

impl Cfg {
    pub const ENTRY: usize = 0;

    pub fn id(&self, idx: usize) -> NodeId {
        NodeId { func: self.func, idx }
    }

    pub fn node(&self, idx: usize) -> &CfgNode {
        &self.nodes[idx]
    }

    fn walk(&mut self, e: &Expr, w: BigRational, parent_case: Option<usize>) -> Result<usize, CfgError> {
        let idx = self.nodes.len();
        match e {
            Expr::Var(v) => {
                self.nodes.push(CfgNode { payload: Payload::Terminal(v.clone()), weight: w, succs: vec![], parent_case });
            }
            Expr::Let(l) => {
                let ty = l.ty.clone().ok_or_else(|| CfgError::NotAnf(self.name.clone()))?;
                self.nodes.push(CfgNode {
                    payload: Payload::Let { var: l.var.clone(), ty, rhs: l.rhs.clone() },
                    weight: w.clone(),
                    succs: vec![],
                    parent_case,
                });
                let s = stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.walk(&l.body, w, parent_case))?;
                self.nodes[idx].succs.push(s);
            }
            Expr::Case(c) => {
                let Arg::Var(scrut) = &c.scrut else {
                    return Err(CfgError::NotAnf(self.name.clone()));
                };
                let arms = c.arms.iter().map(|a| (a.ctor.clone(), a.binders.clone())).collect();
                self.nodes.push(CfgNode {
                    payload: Payload::Case { scrut: scrut.clone(), arms },
                    weight: w.clone(),
                    succs: vec![],
                    parent_case,
                });
                let share = w / BigInt::from(c.arms.len());
                for a in &c.arms {
                    let s = stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.walk(&a.body, share.clone(), Some(idx)))?;
                    self.nodes[idx].succs.push(s);
                }
            }
            Expr::Ret(_) => return Err(CfgError::NotAnf(self.name.clone())),
        }
        Ok(idx)
    }

    /// Deterministic topological order; ties go to the smaller id.
    pub fn topo_order(&self) -> Vec<usize> {
        let mut indeg = vec![0usize; self.nodes.len()];
        for n in &self.nodes {
            for &s in &n.succs {
                indeg[s] += 1;
            }
        }
        let mut ready: BTreeSet<usize> = (0..self.nodes.len()).filter(|&i| indeg[i] == 0).collect();
        let mut out = Vec::with_capacity(self.nodes.len());
        while let Some(i) = ready.pop_first() {
            out.push(i);
            for &s in &self.nodes[i].succs {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.insert(s);
                }
            }
        }
        out
    }

    /// Graphviz rendering. Nodes show their payload and weight; arm edges of
    /// a `case` are labelled with the arm weight. Weights use 3 decimals.
    pub fn emit_dot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"cfg_{}\" {{", dot_escape(&self.name));
        let _ = writeln!(s, "  node [shape=box, fontname=\"monospace\"];");
        for (i, n) in self.nodes.iter().enumerate() {
            let shape = match n.payload {
                Payload::Case { .. } => ", shape=diamond",
                Payload::Terminal(_) => ", shape=ellipse",
                Payload::Let { .. } => "",
            };
            let _ = writeln!(
                s,
                "  n{i} [label=\"{}\\n{}\"{shape}];",
                dot_escape(&n.payload.summary()),
                fmt_weight(&n.weight)
            );
        }
        for (i, n) in self.nodes.iter().enumerate() {
            for &t in &n.succs {
                match n.payload {
                    Payload::Case { .. } => {
                        let _ = writeln!(s, "  n{i} -> n{t} [label=\"{}\"];", fmt_weight(&self.nodes[t].weight));
                    }
                    _ => {
                        let _ = writeln!(s, "  n{i} -> n{t};");
                    }
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

pub(crate) fn fmt_weight(w: &BigRational) -> String {
    format!("{:.3}", w.to_f64().unwrap_or(f64::NAN))
}

pub(crate) fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
