//! Definitions, uses and dependences over a [`Cfg`].
//!
//! A node depends on the node defining any variable it reads (pattern
//! binders are defined by their `case` node) and on its innermost enclosing
//! `case` node. Dependence is transitive.

use std::collections::{BTreeSet, HashMap};

use crate::cfg::{Cfg, NodeId, Payload};
use crate::lang::Name;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Def {
    Param,
    Node(usize),
}

#[derive(Clone, Debug)]
pub struct DataFlowInfo {
    pub func: usize,
    pub defs: HashMap<Name, Def>,
    pub uses: HashMap<Name, Vec<usize>>,
    /// `deps[u]` holds every node `u` transitively depends on.
    deps: Vec<BTreeSet<usize>>,
    parent_case: Vec<Option<usize>>,
    is_let: Vec<bool>,
    /// Variables each variable is transitively computed from.
    pub derives: HashMap<Name, BTreeSet<Name>>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DataflowError {
    #[error("nodes belong to different functions ({0} and {1})")]
    CrossFunction(usize, usize),
    #[error("node {0:?} does not exist")]
    NoSuchNode(NodeId),
}

pub fn analyze(g: &Cfg, params: &[Name]) -> DataFlowInfo {
    let mut defs: HashMap<Name, Def> = params.iter().map(|p| (p.clone(), Def::Param)).collect();
    let mut uses: HashMap<Name, Vec<usize>> = HashMap::new();
    let mut derives: HashMap<Name, BTreeSet<Name>> = params.iter().map(|p| (p.clone(), BTreeSet::new())).collect();
    // Pre-order numbering: definitions precede their uses.
    for (i, n) in g.nodes.iter().enumerate() {
        for v in n.payload.free_vars() {
            uses.entry(v.clone()).or_default().push(i);
        }
        match &n.payload {
            Payload::Let { var, rhs, .. } => {
                defs.insert(var.clone(), Def::Node(i));
                let mut d = BTreeSet::new();
                for v in rhs.vars() {
                    d.insert(v.clone());
                    if let Some(dv) = derives.get(v) {
                        d.extend(dv.iter().cloned());
                    }
                }
                derives.insert(var.clone(), d);
            }
            Payload::Case { scrut, arms } => {
                let mut d: BTreeSet<Name> = derives.get(scrut).cloned().unwrap_or_default();
                d.insert(scrut.clone());
                for (_, bs) in arms {
                    for b in bs {
                        defs.insert(b.clone(), Def::Node(i));
                        derives.insert(b.clone(), d.clone());
                    }
                }
            }
            Payload::Terminal(_) => {}
        }
    }
    let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); g.nodes.len()];
    // Sibling arms may reuse binder names, so resolve each read against the
    // definitions on the node's own path.
    let mut scope: Vec<HashMap<Name, usize>> = vec![HashMap::new(); g.nodes.len()];
    for i in 0..g.nodes.len() {
        let n = &g.nodes[i];
        let mut direct = BTreeSet::new();
        for v in n.payload.free_vars() {
            if let Some(&d) = scope[i].get(v) {
                direct.insert(d);
            }
        }
        if let Some(c) = n.parent_case {
            direct.insert(c);
        }
        let mut all = BTreeSet::new();
        for d in direct {
            all.insert(d);
            all.extend(deps[d].iter().copied());
        }
        deps[i] = all;
        let here = scope[i].clone();
        match &n.payload {
            Payload::Let { var, .. } => {
                let mut s = here;
                s.insert(var.clone(), i);
                scope[n.succs[0]] = s;
            }
            Payload::Case { arms, .. } => {
                for ((_, bs), &t) in arms.iter().zip(&n.succs) {
                    let mut s = here.clone();
                    for b in bs {
                        s.insert(b.clone(), i);
                    }
                    scope[t] = s;
                }
            }
            Payload::Terminal(_) => {}
        }
    }
    DataFlowInfo {
        func: g.func,
        defs,
        uses,
        deps,
        parent_case: g.nodes.iter().map(|n| n.parent_case).collect(),
        is_let: g.nodes.iter().map(|n| matches!(n.payload, Payload::Let { .. })).collect(),
        derives,
    }
}

impl DataFlowInfo {
    fn check(&self, n: NodeId) -> Result<usize, DataflowError> {
        if n.func != self.func {
            return Err(DataflowError::CrossFunction(self.func, n.func));
        }
        if n.idx >= self.deps.len() {
            return Err(DataflowError::NoSuchNode(n));
        }
        Ok(n.idx)
    }

    /// True when `a` transitively depends on `b`.
    pub fn depends(&self, a: NodeId, b: NodeId) -> Result<bool, DataflowError> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        Ok(self.deps[a].contains(&b))
    }

    /// Two bindings may swap when neither depends on the other and both sit
    /// directly under the same innermost `case` (or both under none).
    pub fn may_reorder(&self, a: NodeId, b: NodeId) -> Result<bool, DataflowError> {
        if a.func != b.func {
            return Err(DataflowError::CrossFunction(a.func, b.func));
        }
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        Ok(ia != ib
            && self.is_let[ia]
            && self.is_let[ib]
            && self.parent_case[ia] == self.parent_case[ib]
            && !self.deps[ia].contains(&ib)
            && !self.deps[ib].contains(&ia))
    }

    /// True when `var` is `src` or is computed from it.
    pub fn derives_from(&self, var: &Name, src: &Name) -> bool {
        var == src || self.derives.get(var).is_some_and(|d| d.contains(src))
    }
}
