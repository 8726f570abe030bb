use std::fmt::Write;

use super::{regime, Constraint, CostParams, Regime, Relation};
use crate::access::{EdgeKind, FieldAccessGraph};
use crate::attrs::AttrSet;

/// Human-readable integer-program listing of one constructor's layout
/// problem: one position variable per field, the all-different pairs, four
/// indicator terms per edge and the user constraints. Deterministic.
pub fn emit_lp(g: &FieldAccessGraph, attrs: &[AttrSet], params: &CostParams, cs: &[Constraint]) -> String {
    let n = g.n;
    let mut s = String::new();
    let _ = writeln!(s, "\\ layout of {}: {} fields, {} edges", g.dcon, n, g.edges.len());
    s.push_str("variables\n");
    for i in 0..n {
        let _ = writeln!(s, "  f{i} in [0, {}] integer", n.saturating_sub(1));
    }
    s.push_str("all-different\n");
    for i in 0..n {
        for j in i + 1..n {
            let _ = writeln!(s, "  f{i} != f{j}");
        }
    }
    s.push_str("minimize\n");
    for (k, e) in g.edges.iter().enumerate() {
        let r = regime(e, attrs);
        let kind = match e.kind {
            EdgeKind::DataFlow => "data-flow",
            EdgeKind::ControlFlow => "control-flow",
        };
        let reg = match r {
            Regime::DataFlow => "df",
            Regime::Inlineable => "inl",
        };
        let _ = writeln!(s, "  e{k}: f{} -> f{} ({kind}, weight {}, {reg} costs)", e.src, e.dst, e.weight);
        let d = format!("f{} - f{}", e.dst, e.src);
        for (rel, cond) in [
            (Relation::Succ, format!("{d} = 1")),
            (Relation::After, format!("{d} >= 2")),
            (Relation::Pred, format!("{d} = -1")),
            (Relation::Before, format!("{d} <= -2")),
        ] {
            let _ = writeln!(s, "    + {} [{cond}]", params.regime(r).get(rel) * &e.weight);
        }
    }
    s.push_str("subject to\n");
    for c in cs {
        match *c {
            Constraint::Absolute { field, pos } => {
                let _ = writeln!(s, "  f{field} = {pos}");
            }
            Constraint::Relative { after, before, adjacent: true } => {
                let _ = writeln!(s, "  f{after} - f{before} = 1");
            }
            Constraint::Relative { after, before, adjacent: false } => {
                let _ = writeln!(s, "  f{after} - f{before} >= 1");
            }
        }
    }
    s.push_str("end\n");
    s
}
