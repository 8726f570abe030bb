use serde::{Deserialize, Serialize};

use super::exact::first_feasible;
use super::{layout_cost, solve_exact, solve_greedy, Constraint, CostParams, LayoutAssignment, Solution, SolveError};
use crate::access::FieldAccessGraph;
use crate::attrs::AttrSet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Solver,
    Greedy,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Solver => "solver",
            Mode::Greedy => "greedy",
        }
    }
}

/// Layout problem of one constructor: its (merged) graph, the field
/// attributes used to pick cost regimes, and user constraints.
#[derive(Clone, Debug)]
pub struct GlobalProblem {
    pub graph: FieldAccessGraph,
    pub attrs: Vec<AttrSet>,
    pub constraints: Vec<Constraint>,
}

/// Solve every constructor's problem independently.
///
/// In greedy mode a walk that violates the constraints is replaced by the
/// first feasible order, searching lexicographically from the walk.
pub fn solve_global(problems: &[GlobalProblem], params: &CostParams, mode: Mode) -> Result<Vec<Solution>, SolveError> {
    problems
        .iter()
        .map(|p| match mode {
            Mode::Solver => solve_exact(&p.graph, &p.attrs, params, &p.constraints),
            Mode::Greedy => {
                let mut layout = solve_greedy(&p.graph);
                let pos = layout.pos();
                if !p.constraints.iter().all(|c| c.in_range(p.graph.n) && c.holds(&pos)) {
                    layout = LayoutAssignment {
                        dcon: layout.dcon.clone(),
                        order: first_feasible(&p.graph.dcon, &layout.order, &p.constraints)?,
                    };
                }
                let cost = layout_cost(&layout, &p.graph, &p.attrs, params);
                Ok(Solution { layout, cost })
            }
        })
        .collect()
}
