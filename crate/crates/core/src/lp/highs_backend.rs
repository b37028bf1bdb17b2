use std::ops::Bound;

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense as HSense};

use super::{LinSystem, LpSolver, Relation, Sense, SolveLimits, SolveOutcome, SolveStatus, VarKind};
use crate::error::Result;

/// HiGHS through the `highs` crate.
pub struct HighsSolver;

fn range(lo: Option<f64>, hi: Option<f64>) -> (Bound<f64>, Bound<f64>) {
    (lo.map_or(Bound::Unbounded, Bound::Included), hi.map_or(Bound::Unbounded, Bound::Included))
}

impl HighsSolver {
    fn run(&self, sys: &LinSystem<f64>, limits: &SolveLimits, start: Option<&[f64]>, presolve: bool) -> SolveOutcome {
        let mut cost = vec![0.0; sys.num_vars()];
        let sense = match &sys.objective {
            Some(o) => {
                for (v, c) in &o.terms {
                    cost[v.0] += c;
                }
                o.sense
            }
            None => Sense::Minimize,
        };
        let mut pb = RowProblem::default();
        let cols: Vec<_> = sys
            .vars
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let r = range(v.lower, v.upper);
                match v.kind {
                    VarKind::Continuous => pb.add_column(cost[i], r),
                    VarKind::Binary => pb.add_integer_column(cost[i], r),
                }
            })
            .collect();
        for c in &sys.constraints {
            let terms: Vec<_> = c.terms.iter().map(|(v, x)| (cols[v.0], *x)).collect();
            let r = match c.relation {
                Relation::Le | Relation::Lt => range(None, Some(c.rhs)),
                Relation::Ge | Relation::Gt => range(Some(c.rhs), None),
                Relation::Eq => range(Some(c.rhs), Some(c.rhs)),
            };
            pb.add_row(r, terms);
        }
        let mut model = match pb.try_optimise(match sense {
            Sense::Minimize => HSense::Minimise,
            Sense::Maximize => HSense::Maximise,
        }) {
            Ok(m) => m,
            Err(e) => return SolveOutcome::unknown(format!("HiGHS rejected the model: {e:?}")),
        };
        model.make_quiet();
        model.set_option("primal_feasibility_tolerance", 1e-10);
        model.set_option("dual_feasibility_tolerance", 1e-10);
        model.set_option("mip_feasibility_tolerance", 1e-10);
        model.set_option("mip_rel_gap", limits.mip_gap);
        model.set_option("threads", 1);
        if !presolve {
            model.set_option("presolve", "off");
        }
        if let Some(t) = limits.time_limit {
            model.set_option("time_limit", t.as_secs_f64());
        }
        if let Some(s) = start {
            let _ = model.try_set_solution(Some(s), None, None, None);
        }
        let solved = model.solve();
        let values = || Some(solved.get_solution().columns().to_vec());
        match solved.status() {
            HighsModelStatus::Optimal => SolveOutcome {
                status: SolveStatus::Optimal,
                values: values(),
                objective: Some(solved.objective_value()),
                gap: Some(if sys.is_mip() { solved.mip_gap() } else { 0.0 }),
            },
            HighsModelStatus::ModelEmpty => SolveOutcome {
                status: SolveStatus::Optimal,
                values: Some(Vec::new()),
                objective: Some(0.0),
                gap: Some(0.0),
            },
            HighsModelStatus::Infeasible => SolveOutcome::infeasible(),
            HighsModelStatus::Unbounded => {
                SolveOutcome { status: SolveStatus::Unbounded, values: None, objective: None, gap: None }
            }
            HighsModelStatus::UnboundedOrInfeasible => SolveOutcome::unknown("unbounded or infeasible"),
            other => {
                if solved.primal_solution_status() == HighsSolutionStatus::Feasible {
                    SolveOutcome {
                        status: SolveStatus::Feasible,
                        values: values(),
                        objective: Some(solved.objective_value()),
                        gap: Some(solved.mip_gap()),
                    }
                } else {
                    SolveOutcome::unknown(format!("{other:?}"))
                }
            }
        }
    }
}

impl LpSolver for HighsSolver {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve_plain(&self, sys: &LinSystem<f64>, limits: &SolveLimits, start: Option<&[f64]>) -> Result<SolveOutcome> {
        let out = self.run(sys, limits, start, true);
        if matches!(&out.status, SolveStatus::Unknown(r) if r == "unbounded or infeasible") {
            // presolve cannot tell the two apart; the simplex run can.
            let again = self.run(sys, limits, start, false);
            if matches!(&again.status, SolveStatus::Unknown(r) if r == "unbounded or infeasible")
                && sys.objective.as_ref().map_or(true, |o| o.terms.is_empty())
            {
                return Ok(SolveOutcome::infeasible());
            }
            return Ok(again);
        }
        Ok(out)
    }
}
