use microlp::{ComparisonOp, OptimizationDirection, Problem, SolutionStatus};

use super::{LinSystem, LpSolver, Relation, Sense, SolveLimits, SolveOutcome, SolveStatus, VarKind};
use crate::error::Result;

/// The pure-Rust `microlp` solver.
pub struct MicrolpSolver;

impl LpSolver for MicrolpSolver {
    fn name(&self) -> &'static str {
        "microlp"
    }

    fn solve_plain(&self, sys: &LinSystem<f64>, limits: &SolveLimits, _start: Option<&[f64]>) -> Result<SolveOutcome> {
        let mut cost = vec![0.0; sys.num_vars()];
        let dir = match &sys.objective {
            Some(o) => {
                for (v, c) in &o.terms {
                    cost[v.0] += c;
                }
                match o.sense {
                    Sense::Minimize => OptimizationDirection::Minimize,
                    Sense::Maximize => OptimizationDirection::Maximize,
                }
            }
            None => OptimizationDirection::Minimize,
        };
        let mut p = Problem::new(dir);
        if let Some(t) = limits.time_limit {
            p.set_time_limit(t);
        }
        let vars: Vec<_> = sys
            .vars
            .iter()
            .enumerate()
            .map(|(i, v)| match v.kind {
                VarKind::Binary => p.add_binary_var(cost[i]),
                VarKind::Continuous => {
                    p.add_var(cost[i], (v.lower.unwrap_or(f64::NEG_INFINITY), v.upper.unwrap_or(f64::INFINITY)))
                }
            })
            .collect();
        for c in &sys.constraints {
            let terms: Vec<_> = c.terms.iter().map(|(v, x)| (vars[v.0], *x)).collect();
            let op = match c.relation {
                Relation::Le | Relation::Lt => ComparisonOp::Le,
                Relation::Ge | Relation::Gt => ComparisonOp::Ge,
                Relation::Eq => ComparisonOp::Eq,
            };
            p.add_constraint(terms.as_slice(), op, c.rhs);
        }
        Ok(match p.solve() {
            Ok(outcome) => match outcome.solution() {
                Some(sol) => SolveOutcome {
                    status: match sol.status() {
                        SolutionStatus::Optimal => SolveStatus::Optimal,
                        SolutionStatus::Feasible => SolveStatus::Feasible,
                    },
                    values: Some(vars.iter().map(|&v| sol.var_value(v)).collect()),
                    objective: Some(sol.objective()),
                    gap: sol.gap(),
                },
                None => SolveOutcome::unknown("interrupted before an incumbent was found"),
            },
            Err(microlp::Error::Infeasible) => SolveOutcome::infeasible(),
            Err(microlp::Error::Unbounded) => {
                SolveOutcome { status: SolveStatus::Unbounded, values: None, objective: None, gap: None }
            }
            Err(e) => SolveOutcome::unknown(e.to_string()),
        })
    }
}
