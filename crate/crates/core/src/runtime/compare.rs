use serde::Serialize;

use super::layout::{serialize, LayoutDescriptor, OffsetMode};
use super::packed::{interp_packed, PackedArg, TraversalMetrics};
use super::{interp_boxed_with, EvalError, Limits, Value};
use crate::lang::{Program, Type};

/// Serialize the datatype arguments of `entry` with `p`'s field orders and
/// run the packed interpreter on them.
pub fn run_packed(
    p: &Program,
    entry: &str,
    args: &[Value],
    mode: OffsetMode,
    limits: Limits,
) -> Result<(Value, TraversalMetrics), EvalError> {
    let f = p.find_fun(entry).ok_or_else(|| EvalError::UnknownFunction(entry.into()))?;
    if f.params.len() != args.len() {
        return Err(EvalError::Arity { func: entry.into(), expected: f.params.len(), found: args.len() });
    }
    let desc = LayoutDescriptor::from_program(p, mode);
    let packed = f
        .param_tys
        .iter()
        .zip(args)
        .map(|(t, v)| match t {
            Type::Data(n) => {
                let d = desc.data_index(n).ok_or_else(|| EvalError::Internal(format!("no layout for `{n}`")))?;
                Ok(PackedArg::Buffer(serialize(v, d, &desc)?))
            }
            _ => Ok(PackedArg::Scalar(v.clone())),
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    interp_packed(p, entry, &packed, limits)
}

/// A program variant to measure; its arguments are given in its own
/// representation.
#[derive(Clone, Debug)]
pub struct LayoutCandidate {
    pub label: String,
    pub program: Program,
    pub entry: String,
    pub args: Vec<Value>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub label: String,
    pub metrics: TraversalMetrics,
    pub composite: u64,
    /// Packed result equals the boxed result of the same candidate.
    pub agrees: bool,
    pub argmin: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub mode: OffsetMode,
    pub deref_weight: u64,
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    /// Index of the cheapest row; ties go to the earlier row.
    pub fn argmin(&self) -> Option<usize> {
        (0..self.rows.len()).min_by_key(|&i| (self.rows[i].composite, i))
    }
}

/// Run every candidate in the packed interpreter and check it against the
/// boxed interpreter.
pub fn compare_layouts(
    candidates: &[LayoutCandidate],
    mode: OffsetMode,
    deref_weight: u64,
    limits: Limits,
) -> Result<CompareReport, EvalError> {
    let mut rows = Vec::new();
    for c in candidates {
        let (v, metrics) = run_packed(&c.program, &c.entry, &c.args, mode, limits)?;
        let boxed = interp_boxed_with(&c.program, &c.entry, &c.args, limits)?;
        rows.push(CompareRow {
            label: c.label.clone(),
            metrics,
            composite: metrics.composite(deref_weight),
            agrees: v == boxed,
            argmin: false,
        });
    }
    let mut report = CompareReport { mode, deref_weight, rows };
    if let Some(i) = report.argmin() {
        report.rows[i].argmin = true;
    }
    Ok(report)
}
