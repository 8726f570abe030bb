//! End-to-end driver: analyze a program, choose layouts, rewrite.

use std::collections::BTreeMap;

use crate::access::{build_field_access_graph, merge_graphs, FieldAccessGraph};
use crate::attrs::{classify_fields, FieldAttrTable};
use crate::cfg::{build_cfg, Cfg, CfgError};
use crate::lang::{Expr, Name, Program};
use crate::rewrite::{apply_layouts, RewriteError, RewritePlan};
use crate::solver::{
    constraints_from_annotations, emit_lp, solve_global, CostParams, GlobalProblem, LayoutAssignment, Mode, Solution,
    SolveError,
};

/// Which functions' graphs decide the layouts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scope {
    /// Merge the graphs of every function matching on a constructor.
    Global,
    /// Only the named function's graphs.
    Local(String),
}

/// Everything the analyses compute for one program.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub cfgs: Vec<Cfg>,
    pub attrs: FieldAttrTable,
    /// Per constructor, the graph of every function matching on it, in
    /// function order.
    pub graphs: BTreeMap<Name, Vec<(usize, FieldAccessGraph)>>,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Cfg(#[from] CfgError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
}

fn matched_ctors(e: &Expr, out: &mut Vec<Name>) {
    match e {
        Expr::Let(l) => matched_ctors(&l.body, out),
        Expr::Case(c) => {
            for a in &c.arms {
                if !out.contains(&a.ctor) {
                    out.push(a.ctor.clone());
                }
                stacker::maybe_grow(64 * 1024, 1024 * 1024, || matched_ctors(&a.body, out));
            }
        }
        Expr::Var(_) | Expr::Ret(_) => {}
    }
}

pub fn analyze_program(p: &Program) -> Result<Analysis, PipelineError> {
    let cfgs = p.funs.iter().enumerate().map(|(i, f)| build_cfg(i, f)).collect::<Result<Vec<_>, _>>()?;
    let attrs = classify_fields(p);
    let mut graphs: BTreeMap<Name, Vec<(usize, FieldAccessGraph)>> = BTreeMap::new();
    for (i, f) in p.funs.iter().enumerate() {
        let mut ctors = Vec::new();
        matched_ctors(&f.body, &mut ctors);
        for c in ctors {
            let Some((_, def)) = p.find_ctor(&c) else { continue };
            if def.fields.is_empty() {
                continue;
            }
            let g = build_field_access_graph(&cfgs[i], &c, def.fields.len());
            graphs.entry(c).or_default().push((i, g));
        }
    }
    Ok(Analysis { cfgs, attrs, graphs })
}

/// The layout problem of every constructor with fields that the scope
/// matches on, in declaration order.
pub fn layout_problems(p: &Program, a: &Analysis, scope: &Scope) -> Result<Vec<GlobalProblem>, PipelineError> {
    let local = match scope {
        Scope::Global => None,
        Scope::Local(f) => Some(p.funs.iter().position(|x| *x.name == **f).ok_or_else(|| PipelineError::UnknownFunction(f.clone()))?),
    };
    let mut constraints = constraints_from_annotations(p);
    let mut out = Vec::new();
    for (_, c) in p.ctor_refs() {
        let Some(gs) = a.graphs.get(&c.name) else { continue };
        let (graph, attrs) = match local {
            None => {
                let gs: Vec<FieldAccessGraph> = gs.iter().map(|(_, g)| g.clone()).collect();
                (merge_graphs(&gs).expect("non-empty"), a.attrs.union_for(&c.name))
            }
            Some(fi) => match gs.iter().find(|(i, _)| *i == fi) {
                Some((_, g)) => (g.clone(), a.attrs.for_fn(&p.funs[fi].name, &c.name)),
                None => continue,
            },
        };
        out.push(GlobalProblem { graph, attrs, constraints: constraints.remove(&*c.name).unwrap_or_default() });
    }
    Ok(out)
}

/// Result of [`optimize`].
#[derive(Clone, Debug)]
pub struct Optimized {
    pub solutions: Vec<Solution>,
    pub mode: Mode,
    pub program: Program,
    pub plan: RewritePlan,
}

/// Choose layouts for `p` and rewrite it accordingly.
pub fn optimize(p: &Program, mode: Mode, scope: &Scope, params: &CostParams) -> Result<Optimized, PipelineError> {
    let a = analyze_program(p)?;
    let problems = layout_problems(p, &a, scope)?;
    let solutions = solve_global(&problems, params, mode)?;
    let layouts: Vec<LayoutAssignment> = solutions.iter().map(|s| s.layout.clone()).collect();
    let (program, plan) = apply_layouts(p, &layouts)?;
    Ok(Optimized { solutions, mode, program, plan })
}

/// JSON array with one compact `{dcon, order, cost_num, cost_den, mode}`
/// object per line.
pub fn layout_report(solutions: &[Solution], mode: Mode) -> String {
    let lines: Vec<String> = solutions
        .iter()
        .map(|s| {
            format!(
                "{{\"dcon\":{},\"order\":{},\"cost_num\":{},\"cost_den\":{},\"mode\":\"{}\"}}",
                serde_json::to_string(&s.layout.dcon).expect("string serializes"),
                serde_json::to_string(&s.layout.order).expect("array serializes"),
                s.cost.numer(),
                s.cost.denom(),
                mode.as_str()
            )
        })
        .collect();
    if lines.is_empty() {
        return "[]\n".into();
    }
    format!("[\n{}\n]\n", lines.join(",\n"))
}

/// LP listing of every problem in the scope, concatenated.
pub fn lp_listing(problems: &[GlobalProblem], params: &CostParams) -> String {
    problems.iter().map(|p| emit_lp(&p.graph, &p.attrs, params, &p.constraints)).collect::<Vec<_>>().join("\n")
}
