use super::{LinSystem, SolveLimits, SolveOutcome};
use crate::error::{Error, Result};

/// A solver for systems without strict rows or indicator links.
pub trait LpSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// `start` is an optional warm start for MIPs.
    fn solve_plain(&self, sys: &LinSystem<f64>, limits: &SolveLimits, start: Option<&[f64]>) -> Result<SolveOutcome>;
}

pub fn solver_by_name(name: &str) -> Result<Box<dyn LpSolver>> {
    match name {
        #[cfg(feature = "highs")]
        "highs" => Ok(Box::new(super::HighsSolver)),
        "microlp" => Ok(Box::new(super::MicrolpSolver)),
        other => Err(Error::BackendUnavailable(other.to_string())),
    }
}

/// The backend named by `FARKAS_SOLVER`, or HiGHS when available.
pub fn default_solver() -> Result<Box<dyn LpSolver>> {
    match std::env::var("FARKAS_SOLVER") {
        Ok(name) if !name.is_empty() => solver_by_name(&name),
        _ => {
            #[cfg(feature = "highs")]
            return solver_by_name("highs");
            #[cfg(not(feature = "highs"))]
            return solver_by_name("microlp");
        }
    }
}
