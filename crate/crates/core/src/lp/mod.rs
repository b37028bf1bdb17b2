//! Linear and mixed-integer constraint systems, solver backends and the checker.

mod backend;
#[cfg(feature = "highs")]
mod highs_backend;
mod microlp_backend;

use std::fmt::Write;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::value::Scalar;

pub use backend::{default_solver, solver_by_name, LpSolver};
#[cfg(feature = "highs")]
pub use highs_backend::HighsSolver;
pub use microlp_backend::MicrolpSolver;

/// Default margin used to encode strict inequalities.
pub const STRICT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable<N> {
    pub name: String,
    pub lower: Option<N>,
    pub upper: Option<N>,
    pub kind: VarKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
    Lt,
    Gt,
}

impl Relation {
    pub fn is_strict(self) -> bool {
        matches!(self, Relation::Lt | Relation::Gt)
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Le | Relation::Lt => "<=",
            Relation::Ge | Relation::Gt => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint<N> {
    pub name: String,
    pub terms: Vec<(VarId, N)>,
    pub relation: Relation,
    pub rhs: N,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Objective<N> {
    pub sense: Sense,
    pub terms: Vec<(VarId, N)>,
}

/// `binary = 0 ⇒ var = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Indicator {
    pub binary: VarId,
    pub var: VarId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinSystem<N> {
    pub vars: Vec<Variable<N>>,
    pub constraints: Vec<Constraint<N>>,
    pub objective: Option<Objective<N>>,
    pub indicators: Vec<Indicator>,
}

impl<N> Default for LinSystem<N> {
    fn default() -> Self {
        LinSystem { vars: Vec::new(), constraints: Vec::new(), objective: None, indicators: Vec::new() }
    }
}

impl<N: Scalar> LinSystem<N> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: Option<N>, upper: Option<N>) -> VarId {
        self.vars.push(Variable { name: name.into(), lower, upper, kind: VarKind::Continuous });
        VarId(self.vars.len() - 1)
    }

    pub fn add_nonneg(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, Some(N::zero()), None)
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, None, None)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower: Some(N::zero()),
            upper: Some(N::one()),
            kind: VarKind::Binary,
        });
        VarId(self.vars.len() - 1)
    }

    /// Adds a constraint, merging repeated variables and dropping zero coefficients.
    pub fn add_constraint(&mut self, name: impl Into<String>, mut terms: Vec<(VarId, N)>, relation: Relation, rhs: N) {
        terms.sort_by_key(|(v, _)| *v);
        let mut merged: Vec<(VarId, N)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some((w, d)) if *w == v => *d = d.clone() + c,
                _ => merged.push((v, c)),
            }
        }
        let terms = merged.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        self.constraints.push(Constraint { name: name.into(), terms, relation, rhs });
    }

    pub fn set_objective(&mut self, sense: Sense, terms: Vec<(VarId, N)>) {
        self.objective = Some(Objective { sense, terms });
    }

    pub fn add_indicator(&mut self, binary: VarId, var: VarId) {
        self.indicators.push(Indicator { binary, var });
    }

    pub fn has_strict(&self) -> bool {
        self.constraints.iter().any(|c| c.relation.is_strict())
    }

    pub fn is_mip(&self) -> bool {
        self.vars.iter().any(|v| v.kind == VarKind::Binary)
    }

    pub fn to_f64(&self) -> LinSystem<f64> {
        let conv = |t: &[(VarId, N)]| t.iter().map(|(v, c)| (*v, c.to_f64())).collect();
        LinSystem {
            vars: self
                .vars
                .iter()
                .map(|v| Variable {
                    name: v.name.clone(),
                    lower: v.lower.as_ref().map(N::to_f64),
                    upper: v.upper.as_ref().map(N::to_f64),
                    kind: v.kind,
                })
                .collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint {
                    name: c.name.clone(),
                    terms: conv(&c.terms),
                    relation: c.relation,
                    rhs: c.rhs.to_f64(),
                })
                .collect(),
            objective: self.objective.as_ref().map(|o| Objective { sense: o.sense, terms: conv(&o.terms) }),
            indicators: self.indicators.clone(),
        }
    }

    fn check_vars(&self, values: &[N]) -> Result<()> {
        if values.len() != self.vars.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} variables",
                values.len(),
                self.vars.len()
            )));
        }
        Ok(())
    }
}

/// How an assignment is checked.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CheckMode {
    /// Rational arithmetic, zero slack.
    Exact,
    /// Floating point with additive slack `ε` per row.
    Tolerance(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Name of the violated row, bound or link.
    pub id: String,
    /// By how much it is violated.
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckReport {
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.violations.extend(other.violations);
    }
}

/// Evaluates every row, bound and indicator link.
///
/// Non-strict rows accept a violation of at most `slack`. A strict row
/// `lhs < rhs` is accepted iff `rhs - lhs > -strict_slack`; with zero slacks
/// this is the exact strict comparison.
pub fn check_assignment<N: Scalar>(
    sys: &LinSystem<N>,
    values: &[N],
    slack: &N,
    strict_slack: &N,
) -> Result<CheckReport> {
    sys.check_vars(values)?;
    let mut report = CheckReport::default();
    let mut fail = |id: String, residual: N| report.violations.push(Violation { id, residual: residual.to_f64() });
    for (i, v) in sys.vars.iter().enumerate() {
        let x = &values[i];
        if let Some(l) = &v.lower {
            if l.clone() - x.clone() > *slack {
                fail(format!("{} lower bound", v.name), l.clone() - x.clone());
            }
        }
        if let Some(u) = &v.upper {
            if x.clone() - u.clone() > *slack {
                fail(format!("{} upper bound", v.name), x.clone() - u.clone());
            }
        }
        if v.kind == VarKind::Binary {
            let off0 = x.abs_val();
            let off1 = (x.clone() - N::one()).abs_val();
            if off0 > *slack && off1 > *slack {
                fail(format!("{} integrality", v.name), if off0 < off1 { off0 } else { off1 });
            }
        }
    }
    for c in &sys.constraints {
        let lhs = c.terms.iter().fold(N::zero(), |acc, (v, coef)| acc + coef.clone() * values[v.0].clone());
        let diff = lhs - c.rhs.clone();
        let bad = match c.relation {
            Relation::Le => diff > *slack,
            Relation::Ge => -diff.clone() > *slack,
            Relation::Eq => diff.abs_val() > *slack,
            Relation::Lt => diff >= *strict_slack,
            Relation::Gt => -diff.clone() >= *strict_slack,
        };
        if bad {
            let residual = match c.relation {
                Relation::Ge | Relation::Gt => -diff,
                Relation::Eq => diff.abs_val(),
                _ => diff,
            };
            fail(c.name.clone(), residual);
        }
    }
    for ind in &sys.indicators {
        let b = &values[ind.binary.0];
        let v = &values[ind.var.0];
        if b.abs_val() <= *slack && v.abs_val() > *slack {
            fail(format!("{} => {}", sys.vars[ind.binary.0].name, sys.vars[ind.var.0].name), v.abs_val());
        }
    }
    Ok(report)
}

/// Checks in floating point with tolerance `eps`; strict rows use
/// `min(eps, STRICT_EPS)`.
pub fn check_tolerance(sys: &LinSystem<f64>, values: &[f64], eps: f64) -> Result<CheckReport> {
    check_assignment(sys, values, &eps, &eps.min(STRICT_EPS))
}

#[derive(Clone, Debug)]
pub struct SolveLimits {
    pub time_limit: Option<Duration>,
    /// Relative MIP gap at which the solver may stop.
    pub mip_gap: f64,
    /// Margin for strict rows.
    pub strict_eps: f64,
    /// Big-M used for indicator links whose relaxation is unbounded.
    /// Without it such systems are rejected.
    pub big_m_fallback: Option<f64>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits { time_limit: None, mip_gap: 1e-6, strict_eps: STRICT_EPS, big_m_fallback: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveStatus {
    /// Feasible, and optimal if there is an objective.
    Optimal,
    /// An incumbent was found but optimality was not proven (limit reached).
    Feasible,
    Infeasible,
    Unbounded,
    Unknown(String),
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub values: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
}

impl SolveOutcome {
    pub fn infeasible() -> SolveOutcome {
        SolveOutcome { status: SolveStatus::Infeasible, values: None, objective: None, gap: None }
    }

    pub fn unknown(reason: impl Into<String>) -> SolveOutcome {
        SolveOutcome { status: SolveStatus::Unknown(reason.into()), values: None, objective: None, gap: None }
    }

    pub fn is_feasible(&self) -> bool {
        self.values.is_some()
    }
}

/// Solves `sys`, lowering strict rows and indicator links first.
///
/// A pure feasibility system with strict rows is solved by maximizing a
/// shared margin `t ∈ [0,1]` on those rows; it counts as feasible iff
/// `t ≥ strict_eps`. With an objective the margin is fixed to `strict_eps`.
pub fn solve(solver: &dyn LpSolver, sys: &LinSystem<f64>, limits: &SolveLimits) -> Result<SolveOutcome> {
    solve_with_start(solver, sys, limits, None)
}

pub fn solve_with_start(
    solver: &dyn LpSolver,
    sys: &LinSystem<f64>,
    limits: &SolveLimits,
    start: Option<&[f64]>,
) -> Result<SolveOutcome> {
    let n = sys.num_vars();
    let mut plain = sys.clone();
    if !plain.indicators.is_empty() {
        match lower_indicators(solver, &mut plain, limits)? {
            Some(()) => {}
            None => return Ok(SolveOutcome::infeasible()),
        }
    }
    let margin_var = if plain.objective.is_none() && plain.has_strict() {
        let t = plain.add_var("strict_margin", Some(0.0), Some(1.0));
        for c in plain.constraints.iter_mut() {
            match c.relation {
                Relation::Lt => {
                    c.terms.push((t, 1.0));
                    c.relation = Relation::Le;
                }
                Relation::Gt => {
                    c.terms.push((t, -1.0));
                    c.relation = Relation::Ge;
                }
                _ => {}
            }
        }
        plain.set_objective(Sense::Maximize, vec![(t, 1.0)]);
        Some(t)
    } else {
        for c in plain.constraints.iter_mut() {
            match c.relation {
                Relation::Lt => {
                    c.rhs -= limits.strict_eps;
                    c.relation = Relation::Le;
                }
                Relation::Gt => {
                    c.rhs += limits.strict_eps;
                    c.relation = Relation::Ge;
                }
                _ => {}
            }
        }
        None
    };
    let start = start.map(|s| {
        let mut v = s.to_vec();
        v.resize(plain.num_vars(), 0.0);
        v
    });
    let mut out = solver.solve_plain(&plain, limits, start.as_deref())?;
    if let Some(t) = margin_var {
        if let Some(values) = &out.values {
            if values[t.0] < limits.strict_eps {
                return Ok(SolveOutcome::infeasible());
            }
        }
        out.objective = None;
    }
    if let Some(values) = out.values.as_mut() {
        values.truncate(n);
    }
    Ok(out)
}

/// Upper bound on the sum of all indicator-linked variables over the
/// relaxation without indicators, binaries and strictness. `Ok(None)` when
/// that relaxation is unbounded; [`Error::SolverUnknown`] when it is infeasible.
pub fn indicator_big_m(solver: &dyn LpSolver, sys: &LinSystem<f64>, limits: &SolveLimits) -> Result<Option<f64>> {
    Ok(match relaxation_bound(solver, sys, limits)? {
        Relaxed::Bounded(m) => Some(m),
        Relaxed::Unbounded => None,
        Relaxed::Infeasible => return Err(Error::SolverUnknown("relaxation is infeasible".into())),
    })
}

enum Relaxed {
    Bounded(f64),
    Unbounded,
    Infeasible,
}

fn relaxation_bound(solver: &dyn LpSolver, sys: &LinSystem<f64>, limits: &SolveLimits) -> Result<Relaxed> {
    let linked: Vec<VarId> = sys.indicators.iter().map(|i| i.var).collect();
    for v in &linked {
        if sys.vars[v.0].lower.map_or(true, |l| l < 0.0) {
            return Err(Error::SolverUnknown(format!(
                "indicator-linked variable {} must be non-negative",
                sys.vars[v.0].name
            )));
        }
    }
    let mut relax = sys.clone();
    relax.indicators.clear();
    for v in relax.vars.iter_mut() {
        v.kind = VarKind::Continuous;
    }
    for c in relax.constraints.iter_mut() {
        c.relation = match c.relation {
            Relation::Lt => Relation::Le,
            Relation::Gt => Relation::Ge,
            r => r,
        };
    }
    relax.set_objective(Sense::Maximize, linked.iter().map(|&v| (v, 1.0)).collect());
    let out = solver.solve_plain(&relax, limits, None)?;
    Ok(match out.status {
        SolveStatus::Optimal => Relaxed::Bounded(out.objective.unwrap_or(0.0).max(0.0) * (1.0 + 1e-6) + 1e-6),
        SolveStatus::Infeasible => Relaxed::Infeasible,
        SolveStatus::Unbounded => Relaxed::Unbounded,
        other => return Err(Error::SolverUnknown(format!("big-M computation: {other:?}"))),
    })
}

/// Replaces each indicator `γ = 0 ⇒ v = 0` by `v ≤ M·γ`, where `M` bounds the
/// sum of all linked variables over the indicator-free relaxation.
/// Returns `None` when the relaxation is infeasible.
fn lower_indicators(solver: &dyn LpSolver, sys: &mut LinSystem<f64>, limits: &SolveLimits) -> Result<Option<()>> {
    let big_m = match relaxation_bound(solver, sys, limits)? {
        Relaxed::Bounded(m) => m,
        Relaxed::Infeasible => return Ok(None),
        Relaxed::Unbounded => match limits.big_m_fallback {
            Some(m) => m,
            None => {
                return Err(Error::SolverUnknown(
                    "indicator-linked variables are unbounded; no big-M exists".into(),
                ))
            }
        },
    };
    let inds = std::mem::take(&mut sys.indicators);
    for ind in inds {
        sys.add_constraint(
            format!("link_{}", sys.vars[ind.var.0].name),
            vec![(ind.var, 1.0), (ind.binary, -big_m)],
            Relation::Le,
            0.0,
        );
    }
    Ok(Some(()))
}

/// Writes the system in CPLEX LP text format.
pub fn write_lp_format<N: Scalar>(sys: &LinSystem<N>) -> String {
    let mut out = String::new();
    let name = |v: VarId| sanitize(&sys.vars[v.0].name, v.0);
    let expr = |terms: &[(VarId, N)]| {
        if terms.is_empty() {
            return "0 dummy_zero".to_string();
        }
        let mut s = String::new();
        for (v, c) in terms {
            let c = c.to_f64();
            let sign = if c < 0.0 { "-" } else { "+" };
            write!(s, " {sign} {} {}", c.abs(), name(*v)).unwrap();
        }
        s
    };
    match &sys.objective {
        Some(o) => {
            out.push_str(match o.sense {
                Sense::Minimize => "Minimize\n",
                Sense::Maximize => "Maximize\n",
            });
            writeln!(out, " obj:{}", expr(&o.terms)).unwrap();
        }
        None => out.push_str("Minimize\n obj: 0 dummy_zero\n"),
    }
    out.push_str("Subject To\n");
    for (i, c) in sys.constraints.iter().enumerate() {
        let strict = if c.relation.is_strict() { " \\ strict" } else { "" };
        writeln!(out, " {}:{} {} {}{strict}", sanitize(&c.name, i), expr(&c.terms), c.relation.symbol(), c.rhs.to_f64())
            .unwrap();
    }
    for ind in &sys.indicators {
        writeln!(out, " ind_{}: {} = 0 -> {} = 0", ind.var.0, name(ind.binary), name(ind.var)).unwrap();
    }
    out.push_str("Bounds\n dummy_zero = 0\n");
    for (i, v) in sys.vars.iter().enumerate() {
        let n = name(VarId(i));
        match (&v.lower, &v.upper) {
            (None, None) => writeln!(out, " {n} free").unwrap(),
            (Some(l), None) => writeln!(out, " {n} >= {}", l.to_f64()).unwrap(),
            (None, Some(u)) => writeln!(out, " -inf <= {n} <= {}", u.to_f64()).unwrap(),
            (Some(l), Some(u)) => writeln!(out, " {} <= {n} <= {}", l.to_f64(), u.to_f64()).unwrap(),
        }
    }
    let bins: Vec<String> =
        (0..sys.vars.len()).filter(|&i| sys.vars[i].kind == VarKind::Binary).map(|i| name(VarId(i))).collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for b in bins {
            writeln!(out, " {b}").unwrap();
        }
    }
    out.push_str("End\n");
    out
}

fn sanitize(name: &str, i: usize) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    format!("{s}_{i}")
}
