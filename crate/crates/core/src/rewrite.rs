//! Applying field orders to a program.
//!
//! [`reorder_datatype`] permutes a constructor's declaration together with
//! every construction site, pattern and annotation. [`apply_code_motion`]
//! then reorders straight-line `let` chains so fields are consumed in their
//! new storage order, moving a binding only past bindings it may swap with.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::cfg::build_cfg;
use crate::dataflow::analyze;
use crate::gen::{random_args, Rng64};
use crate::lang::{AnnKind, Arg, Expr, FieldRef, Let, Name, Program, Rhs};
use crate::runtime::{interp_boxed_with, ConValue, EvalError, Limits, Value};
use crate::solver::LayoutAssignment;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("unknown constructor `{0}`")]
    UnknownCtor(String),
    #[error("`{dcon}` has {fields} fields but the layout {order:?} is not a permutation of them")]
    BadPermutation { dcon: String, fields: usize, order: Vec<usize> },
}

/// One reordered `let` chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Motion {
    #[serde(rename = "fn")]
    pub func: String,
    /// Constructor of the innermost enclosing arm, empty at function level.
    pub arm: String,
    pub old: Vec<String>,
    pub new: Vec<String>,
}

/// Layouts applied and the code motion they caused.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewritePlan {
    pub layouts: BTreeMap<String, LayoutAssignment>,
    pub moved: Vec<Motion>,
}

fn permute<T: Clone>(v: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&i| v[i].clone()).collect()
}

/// Permute the fields of one constructor everywhere in `p`.
pub fn reorder_datatype(p: &Program, a: &LayoutAssignment) -> Result<Program, RewriteError> {
    let (r, c) = p.find_ctor(&a.dcon).ok_or_else(|| RewriteError::UnknownCtor(a.dcon.clone()))?;
    if a.order.len() != c.fields.len() || !a.is_permutation() {
        return Err(RewriteError::BadPermutation { dcon: a.dcon.clone(), fields: c.fields.len(), order: a.order.clone() });
    }
    let mut out = p.clone();
    if a.is_identity() {
        return Ok(out);
    }
    let fields = &mut out.datas[r.data].ctors[r.tag].fields;
    *fields = permute(fields, &a.order);
    let dcon: Name = a.dcon.as_str().into();
    for f in &mut out.funs {
        reorder_expr(&mut f.body, &dcon, &a.order);
    }
    if let Some(m) = &mut out.main {
        reorder_expr(m, &dcon, &a.order);
    }
    let pos = a.pos();
    let remap = |r: &mut FieldRef| {
        if let FieldRef::Index(i) = r {
            *i = pos[*i];
        }
    };
    for ann in out.anns.iter_mut().filter(|x| x.ctor == dcon) {
        match &mut ann.kind {
            AnnKind::After { field, before, .. } => {
                remap(field);
                remap(before);
            }
            AnnKind::At { field, .. } => remap(field),
        }
    }
    Ok(out)
}

fn reorder_rhs(r: &mut Rhs, dcon: &Name, order: &[usize]) {
    match r {
        Rhs::ConApp(k, args) if k == dcon => *args = permute(args, order),
        _ => {}
    }
    let args = match r {
        Rhs::FunApp(_, a) | Rhs::ConApp(_, a) | Rhs::Prim(_, a) => a,
        Rhs::Lit(_) => return,
    };
    for a in args {
        if let Arg::Nested(n) = a {
            reorder_rhs(n, dcon, order);
        }
    }
}

fn reorder_expr(e: &mut Expr, dcon: &Name, order: &[usize]) {
    let mut cur = e;
    loop {
        match cur {
            Expr::Let(l) => {
                reorder_rhs(&mut l.rhs, dcon, order);
                cur = &mut l.body;
            }
            Expr::Case(c) => {
                if let Arg::Nested(n) = &mut c.scrut {
                    reorder_rhs(n, dcon, order);
                }
                for a in &mut c.arms {
                    if a.ctor == *dcon {
                        a.binders = permute(&a.binders, order);
                    }
                    stacker::maybe_grow(64 * 1024, 1024 * 1024, || reorder_expr(&mut a.body, dcon, order));
                }
                return;
            }
            Expr::Ret(r) => {
                reorder_rhs(r, dcon, order);
                return;
            }
            Expr::Var(_) => return,
        }
    }
}

/// Apply every layout with [`reorder_datatype`], then [`apply_code_motion`]
/// for the non-identity ones.
pub fn apply_layouts(p: &Program, layouts: &[LayoutAssignment]) -> Result<(Program, RewritePlan), RewriteError> {
    let mut out = p.clone();
    for a in layouts {
        out = reorder_datatype(&out, a)?;
    }
    let moved_ctors: Vec<&str> = layouts.iter().filter(|a| !a.is_identity()).map(|a| a.dcon.as_str()).collect();
    let (out, moved) = apply_code_motion(&out, &moved_ctors);
    let plan = RewritePlan { layouts: layouts.iter().map(|a| (a.dcon.clone(), a.clone())).collect(), moved };
    Ok((out, plan))
}

/// Reorder `let` chains so that bindings reading fields of the constructors
/// in `ctors` follow those fields' storage order.
///
/// A binding's key is the smallest field position it reads. Scanning each
/// chain left to right, a binding moves left past every binding it may swap
/// with, stopping before the first binding with an equal or smaller key (of
/// the same constructor) and landing just before the leftmost binding with a
/// larger key it passed. Bindings that read no such field never move by
/// themselves.
pub fn apply_code_motion(p: &Program, ctors: &[&str]) -> (Program, Vec<Motion>) {
    let mut out = p.clone();
    let mut moved = Vec::new();
    if ctors.is_empty() {
        return (out, moved);
    }
    for (fi, f) in out.funs.iter_mut().enumerate() {
        let Ok(cfg) = build_cfg(fi, f) else { continue };
        let info = analyze(&cfg, &f.params);
        let mut m = Mover { ctors, info: &info, func: fi, name: &f.name, next_id: 0, fields: HashMap::new(), moved: &mut moved };
        m.expr(&mut f.body, "");
    }
    (out, moved)
}

struct Mover<'a> {
    ctors: &'a [&'a str],
    info: &'a crate::dataflow::DataFlowInfo,
    func: usize,
    name: &'a Name,
    /// Pre-order counter matching the CFG's node numbering.
    next_id: usize,
    /// Pattern binders of the tracked constructors in scope.
    fields: HashMap<Name, (Name, usize)>,
    moved: &'a mut Vec<Motion>,
}

impl Mover<'_> {
    fn key(&self, rhs: &Rhs) -> Option<(Name, usize)> {
        let mut best: Option<(Name, usize)> = None;
        for v in rhs.vars() {
            if let Some((c, i)) = self.fields.get(v) {
                match &best {
                    Some((bc, bi)) if bc == c && bi <= i => {}
                    Some((bc, _)) if bc != c => return None,
                    _ => best = Some((c.clone(), *i)),
                }
            }
        }
        best
    }

    fn expr(&mut self, e: &mut Expr, arm: &str) {
        // Collect the maximal let chain starting at `e`.
        let mut chain: Vec<(usize, Let)> = Vec::new();
        let mut cur = std::mem::replace(e, Expr::Var("".into()));
        while let Expr::Let(mut l) = cur {
            cur = std::mem::replace(&mut *l.body, Expr::Var("".into()));
            chain.push((self.next_id, l));
            self.next_id += 1;
        }
        let mut tail = cur;
        if chain.len() > 1 {
            self.reorder(&mut chain, arm);
        }
        match &mut tail {
            Expr::Case(c) => {
                self.next_id += 1;
                for a in &mut c.arms {
                    let tracked = self.ctors.contains(&&*a.ctor);
                    if tracked {
                        for (i, b) in a.binders.iter().enumerate() {
                            self.fields.insert(b.clone(), (a.ctor.clone(), i));
                        }
                    }
                    let ctor = a.ctor.clone();
                    stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.expr(&mut a.body, &ctor));
                    if tracked {
                        for b in &a.binders {
                            self.fields.remove(b);
                        }
                    }
                }
            }
            _ => self.next_id += 1,
        }
        let mut body = tail;
        for (_, mut l) in chain.into_iter().rev() {
            l.body = Box::new(body);
            body = Expr::Let(l);
        }
        *e = body;
    }

    fn reorder(&mut self, chain: &mut Vec<(usize, Let)>, arm: &str) {
        let old: Vec<String> = chain.iter().map(|(_, l)| l.var.to_string()).collect();
        let keys: HashMap<usize, Option<(Name, usize)>> = chain.iter().map(|(id, l)| (*id, self.key(&l.rhs))).collect();
        let swappable = |a: usize, b: usize| {
            self.info
                .may_reorder(crate::cfg::NodeId { func: self.func, idx: a }, crate::cfg::NodeId { func: self.func, idx: b })
                .unwrap_or(false)
        };
        for i in 1..chain.len() {
            let id = chain[i].0;
            let Some((kc, ki)) = &keys[&id] else { continue };
            let mut target = None;
            let mut j = i;
            while j > 0 {
                let other = chain[j - 1].0;
                if let Some((oc, oi)) = &keys[&other] {
                    if oc == kc && oi <= ki {
                        break;
                    }
                }
                if !swappable(id, other) {
                    break;
                }
                j -= 1;
                if matches!(&keys[&other], Some((oc, oi)) if oc == kc && oi > ki) {
                    target = Some(j);
                }
            }
            if let Some(t) = target {
                let item = chain.remove(i);
                chain.insert(t, item);
            }
        }
        let new: Vec<String> = chain.iter().map(|(_, l)| l.var.to_string()).collect();
        if new != old {
            self.moved.push(Motion { func: self.name.to_string(), arm: arm.into(), old, new });
        }
    }
}

/// Field orders indexed by constructor location.
fn layout_table(p: &Program, layouts: &[LayoutAssignment]) -> HashMap<(usize, usize), Vec<usize>> {
    layouts
        .iter()
        .filter(|a| !a.is_identity())
        .filter_map(|a| p.find_ctor(&a.dcon).map(|(r, _)| ((r.data, r.tag), a.order.clone())))
        .collect()
}

fn map_value(v: &Value, table: &HashMap<(usize, usize), Vec<usize>>, inverse: bool) -> Value {
    let Value::Con(c) = v else { return v.clone() };
    let fields: Vec<Value> = c
        .fields
        .iter()
        .map(|f| stacker::maybe_grow(64 * 1024, 1024 * 1024, || map_value(f, table, inverse)))
        .collect();
    let fields = match table.get(&(c.ctor.data, c.ctor.tag)) {
        None => fields,
        Some(order) if !inverse => permute(&fields, order),
        Some(order) => {
            let mut out = fields.clone();
            for (k, &i) in order.iter().enumerate() {
                out[i] = fields[k].clone();
            }
            out
        }
    };
    Value::Con(std::sync::Arc::new(ConValue { ctor: c.ctor, fields }))
}

/// Convert a value of the original program into the representation used by
/// the program rewritten with `layouts`.
pub fn permute_value(p: &Program, v: &Value, layouts: &[LayoutAssignment]) -> Value {
    map_value(v, &layout_table(p, layouts), false)
}

/// Inverse of [`permute_value`].
pub fn unpermute_value(p: &Program, v: &Value, layouts: &[LayoutAssignment]) -> Value {
    map_value(v, &layout_table(p, layouts), true)
}

/// First input on which two programs disagree.
#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub func: String,
    pub inputs: Vec<String>,
    pub before: String,
    pub after: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub trials: usize,
    /// Trials where the original program hit an interpreter limit.
    pub skipped: usize,
    pub divergence: Option<Divergence>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Run `before` and `after` on `trials` random inputs per function and
/// compare results. `after` is `before` rewritten with `layouts`; inputs and
/// outputs are translated between the two representations.
pub fn verify_rewrite(
    before: &Program,
    after: &Program,
    layouts: &[LayoutAssignment],
    trials: usize,
    rng: &mut Rng64,
) -> VerifyReport {
    let limits = Limits { max_depth: 10_000, max_steps: 2_000_000 };
    let table = layout_table(before, layouts);
    let mut report = VerifyReport::default();
    for f in &before.funs {
        for _ in 0..trials {
            let args = random_args(before, f, rng, 5);
            report.trials += 1;
            let expected = interp_boxed_with(before, &f.name, &args, limits);
            if matches!(expected, Err(EvalError::DepthExceeded(_) | EvalError::StepsExceeded(_))) {
                report.skipped += 1;
                continue;
            }
            let moved: Vec<Value> = args.iter().map(|a| map_value(a, &table, false)).collect();
            let got = interp_boxed_with(after, &f.name, &moved, limits).map(|v| map_value(&v, &table, true));
            if got != expected {
                let show = |r: &Result<Value, EvalError>, p: &Program| match r {
                    Ok(v) => v.display(p),
                    Err(e) => format!("error: {e}"),
                };
                report.divergence = Some(Divergence {
                    func: f.name.to_string(),
                    inputs: args.iter().map(|a| a.display(before)).collect(),
                    before: show(&expected, before),
                    after: show(&got, before),
                });
                return report;
            }
        }
    }
    report
}
