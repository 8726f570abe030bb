//! Per-function classification of constructor fields.
//!
//! `Scalar`, `Recursive` and `SelfRecursive` depend only on types.
//! `Inlineable` depends on the function: the field's pattern binder is passed
//! directly to a call into the function's own recursion group.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::lang::{Arg, Expr, Name, Program, Rhs, Type};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FieldAttr {
    Scalar,
    Recursive,
    SelfRecursive,
    Inlineable,
}

impl FieldAttr {
    pub const ALL: [FieldAttr; 4] = [FieldAttr::Scalar, FieldAttr::Recursive, FieldAttr::SelfRecursive, FieldAttr::Inlineable];

    fn bit(self) -> u8 {
        1 << self as u8
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct AttrSet(u8);

impl AttrSet {
    pub fn contains(self, a: FieldAttr) -> bool {
        self.0 & a.bit() != 0
    }

    pub fn insert(&mut self, a: FieldAttr) {
        self.0 |= a.bit();
    }

    pub fn with(mut self, a: FieldAttr) -> AttrSet {
        self.insert(a);
        self
    }

    pub fn union(self, o: AttrSet) -> AttrSet {
        AttrSet(self.0 | o.0)
    }

    pub fn iter(self) -> impl Iterator<Item = FieldAttr> {
        FieldAttr::ALL.into_iter().filter(move |a| self.contains(*a))
    }

    pub fn is_inlineable(self) -> bool {
        self.contains(FieldAttr::Inlineable)
    }
}

impl fmt::Display for AttrSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v: Vec<String> = self.iter().map(|a| format!("{a:?}")).collect();
        write!(f, "{{{}}}", v.join(", "))
    }
}

/// One row of the attribute table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldAttrRow {
    #[serde(rename = "fn")]
    pub func: String,
    pub dcon: String,
    pub field: usize,
    pub attrs: Vec<FieldAttr>,
}

/// Attributes of every field bound by a pattern match, keyed by
/// (function, constructor, field index).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FieldAttrTable {
    pub rows: BTreeMap<(Name, Name, usize), AttrSet>,
    /// Type-only attributes per constructor, for every constructor.
    pub by_type: BTreeMap<Name, Vec<AttrSet>>,
}

impl FieldAttrTable {
    pub fn get(&self, func: &str, dcon: &str, field: usize) -> Option<AttrSet> {
        self.rows.get(&(func.into(), dcon.into(), field)).copied()
    }

    /// Attributes of `dcon`'s fields as seen from `func`; fields the function
    /// never binds get their type-only attributes.
    pub fn for_fn(&self, func: &str, dcon: &str) -> Vec<AttrSet> {
        let base = self.by_type.get(dcon).cloned().unwrap_or_default();
        base.iter()
            .enumerate()
            .map(|(i, b)| self.get(func, dcon, i).unwrap_or(*b))
            .collect()
    }

    /// Union over all functions.
    pub fn union_for(&self, dcon: &str) -> Vec<AttrSet> {
        let mut base = self.by_type.get(dcon).cloned().unwrap_or_default();
        for ((_, d, i), a) in &self.rows {
            if &**d == dcon {
                base[*i] = base[*i].union(*a);
            }
        }
        base
    }

    pub fn to_rows(&self) -> Vec<FieldAttrRow> {
        self.rows
            .iter()
            .map(|((f, d, i), a)| FieldAttrRow { func: f.to_string(), dcon: d.to_string(), field: *i, attrs: a.iter().collect() })
            .collect()
    }
}

/// Datatypes that can reach a cycle in the "field mentions type" graph.
fn recursive_types(p: &Program) -> HashSet<Name> {
    let mut g: DiGraph<Name, ()> = DiGraph::new();
    let ids: HashMap<Name, _> = p.datas.iter().map(|d| (d.name.clone(), g.add_node(d.name.clone()))).collect();
    for d in &p.datas {
        for c in &d.ctors {
            for t in &c.fields {
                if let Type::Data(n) = t {
                    g.update_edge(ids[&d.name], ids[n], ());
                }
            }
        }
    }
    let mut cyclic = HashSet::new();
    for scc in tarjan_scc(&g) {
        if scc.len() > 1 || g.contains_edge(scc[0], scc[0]) {
            cyclic.extend(scc);
        }
    }
    let mut out = HashSet::new();
    for start in g.node_indices() {
        let mut dfs = petgraph::visit::Dfs::new(&g, start);
        while let Some(n) = dfs.next(&g) {
            if cyclic.contains(&n) {
                out.insert(g[start].clone());
                break;
            }
        }
    }
    out
}

/// Recursion group (call-graph SCC) of each function, when that group is
/// actually recursive.
fn recursion_groups(p: &Program) -> HashMap<Name, HashSet<Name>> {
    let mut g: DiGraph<Name, ()> = DiGraph::new();
    let ids: HashMap<Name, _> = p.funs.iter().map(|f| (f.name.clone(), g.add_node(f.name.clone()))).collect();
    for f in &p.funs {
        let mut calls = Vec::new();
        collect_calls(&f.body, &mut calls);
        for (callee, _) in calls {
            if let Some(&t) = ids.get(callee) {
                g.update_edge(ids[&f.name], t, ());
            }
        }
    }
    let mut out = HashMap::new();
    for scc in tarjan_scc(&g) {
        if scc.len() > 1 || g.contains_edge(scc[0], scc[0]) {
            let names: HashSet<Name> = scc.iter().map(|&i| g[i].clone()).collect();
            for &i in &scc {
                out.insert(g[i].clone(), names.clone());
            }
        }
    }
    out
}

fn collect_calls<'a>(e: &'a Expr, out: &mut Vec<(&'a Name, &'a [Arg])>) {
    fn rhs<'a>(r: &'a Rhs, out: &mut Vec<(&'a Name, &'a [Arg])>) {
        if let Rhs::FunApp(f, a) = r {
            out.push((f, a));
        }
        for a in r.args() {
            if let Arg::Nested(n) = a {
                rhs(n, out);
            }
        }
    }
    match e {
        Expr::Let(l) => {
            rhs(&l.rhs, out);
            collect_calls(&l.body, out);
        }
        Expr::Case(c) => {
            if let Arg::Nested(n) = &c.scrut {
                rhs(n, out);
            }
            for a in &c.arms {
                collect_calls(&a.body, out);
            }
        }
        Expr::Ret(r) => rhs(r, out),
        Expr::Var(_) => {}
    }
}

/// Type-only attributes of every constructor's fields.
pub fn type_attrs(p: &Program) -> BTreeMap<Name, Vec<AttrSet>> {
    let rec = recursive_types(p);
    let mut out = BTreeMap::new();
    for d in &p.datas {
        for c in &d.ctors {
            let v = c
                .fields
                .iter()
                .map(|t| {
                    let mut a = AttrSet::default();
                    match t {
                        Type::Data(n) => {
                            if rec.contains(n) {
                                a.insert(FieldAttr::Recursive);
                            }
                            if *n == d.name {
                                a.insert(FieldAttr::SelfRecursive);
                            }
                        }
                        _ => a.insert(FieldAttr::Scalar),
                    }
                    a
                })
                .collect();
            out.insert(c.name.clone(), v);
        }
    }
    out
}

/// Classify every field bound by a pattern match in every function.
pub fn classify_fields(p: &Program) -> FieldAttrTable {
    let by_type = type_attrs(p);
    let groups = recursion_groups(p);
    let mut rows = BTreeMap::new();
    for f in &p.funs {
        let group = groups.get(&f.name);
        walk(&f.body, &f.name, group, &by_type, &mut HashMap::new(), &mut rows);
    }
    FieldAttrTable { rows, by_type }
}

fn walk(
    e: &Expr,
    func: &Name,
    group: Option<&HashSet<Name>>,
    by_type: &BTreeMap<Name, Vec<AttrSet>>,
    bound: &mut HashMap<Name, (Name, usize)>,
    rows: &mut BTreeMap<(Name, Name, usize), AttrSet>,
) {
    match e {
        Expr::Let(l) => {
            if let (Some(group), Rhs::FunApp(callee, args)) = (group, &l.rhs) {
                if group.contains(callee) {
                    for a in args {
                        if let Arg::Var(v) = a {
                            if let Some((dcon, i)) = bound.get(v) {
                                if by_type[dcon][*i].contains(FieldAttr::Recursive) {
                                    rows.entry((func.clone(), dcon.clone(), *i)).or_default().insert(FieldAttr::Inlineable);
                                }
                            }
                        }
                    }
                }
            }
            walk(&l.body, func, group, by_type, bound, rows);
        }
        Expr::Case(c) => {
            for a in &c.arms {
                let base = by_type.get(&a.ctor);
                for (i, b) in a.binders.iter().enumerate() {
                    if let Some(base) = base {
                        let e = rows.entry((func.clone(), a.ctor.clone(), i)).or_default();
                        *e = e.union(base[i]);
                        bound.insert(b.clone(), (a.ctor.clone(), i));
                    }
                }
                stacker::maybe_grow(64 * 1024, 1024 * 1024, || walk(&a.body, func, group, by_type, bound, rows));
                for b in &a.binders {
                    bound.remove(b);
                }
            }
        }
        Expr::Var(_) | Expr::Ret(_) => {}
    }
}
