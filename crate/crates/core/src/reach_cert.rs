//! Farkas certificates for the four reachability query types.

use crate::error::{Error, Result};
use crate::graph::is_ec_free;
use crate::lp::{
    check_assignment, solve, CheckReport, LinSystem, LpSolver, Relation, SolveLimits, SolveStatus, VarId,
    STRICT_EPS,
};
use crate::model::{build_reach_matrices, ReachForm, ReachMatrices};
use crate::query::{Bound, CmpOp, Connective, Quantifier, ReachQuery};
use crate::value::{Rational, Scalar};

/// Tolerance at which every emitted certificate is re-checked.
pub const CERT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryType {
    ExistsAnd,
    ForallOr,
    ExistsOr,
    ForallAnd,
}

impl QueryType {
    pub fn of(quantifier: Quantifier, connective: Connective) -> QueryType {
        match (quantifier, connective) {
            (Quantifier::Exists, Connective::And) => QueryType::ExistsAnd,
            (Quantifier::Forall, Connective::Or) => QueryType::ForallOr,
            (Quantifier::Exists, Connective::Or) => QueryType::ExistsOr,
            (Quantifier::Forall, Connective::And) => QueryType::ForallAnd,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            QueryType::ExistsAnd => "exists-and",
            QueryType::ForallOr => "forall-or",
            QueryType::ExistsOr => "exists-or",
            QueryType::ForallAnd => "forall-and",
        }
    }
}

/// Vectors indexed like the matrices: `y` by row (pair of a non-target
/// state), `x` by column (non-target state), `z` by objective.
#[derive(Clone, Debug, PartialEq)]
pub enum ReachCertificate<N> {
    ExistsAnd { y: Vec<N> },
    ForallOr { x: Vec<N>, z: Vec<N> },
    ExistsOr { index: usize, y: Vec<N> },
    ForallAnd { xs: Vec<Vec<N>> },
}

impl<N: Clone> ReachCertificate<N> {
    pub fn query_type(&self) -> QueryType {
        match self {
            ReachCertificate::ExistsAnd { .. } => QueryType::ExistsAnd,
            ReachCertificate::ForallOr { .. } => QueryType::ForallOr,
            ReachCertificate::ExistsOr { .. } => QueryType::ExistsOr,
            ReachCertificate::ForallAnd { .. } => QueryType::ForallAnd,
        }
    }

    pub fn map<M>(&self, f: impl Fn(&N) -> M) -> ReachCertificate<M> {
        let m = |v: &Vec<N>| v.iter().map(&f).collect::<Vec<M>>();
        match self {
            ReachCertificate::ExistsAnd { y } => ReachCertificate::ExistsAnd { y: m(y) },
            ReachCertificate::ForallOr { x, z } => ReachCertificate::ForallOr { x: m(x), z: m(z) },
            ReachCertificate::ExistsOr { index, y } => ReachCertificate::ExistsOr { index: *index, y: m(y) },
            ReachCertificate::ForallAnd { xs } => ReachCertificate::ForallAnd { xs: xs.iter().map(m).collect() },
        }
    }
}

fn var_name(rf: &ReachForm, prefix: &str, row_or_col: usize, by_row: bool) -> String {
    let m = rf.mdp();
    if by_row {
        format!("{prefix}[{}]", m.pair_name(rf.rows()[row_or_col]))
    } else {
        format!("{prefix}[{}]", m.state_name(rf.columns()[row_or_col]))
    }
}

fn relation(op: CmpOp) -> Relation {
    match op {
        CmpOp::Lt => Relation::Lt,
        CmpOp::Le => Relation::Le,
        CmpOp::Gt => Relation::Gt,
        CmpOp::Ge => Relation::Ge,
    }
}

fn is_trivial(b: &Bound) -> bool {
    b.op == CmpOp::Ge && b.value.is_zero()
}

fn require_ec_free(rf: &ReachForm) -> Result<()> {
    if is_ec_free(rf) {
        Ok(())
    } else {
        Err(Error::EcFreeRequired)
    }
}

/// Adds `y ≥ 0` over the rows with `A⊤y ≤ δ_in` (lower) or `≥` (upper) and
/// `t_i⊤y op_i λ_i` for each listed objective. Returns the `y` variables.
pub(crate) fn add_exists_rows<N: Scalar>(
    sys: &mut LinSystem<N>,
    rf: &ReachForm,
    mats: &ReachMatrices<N>,
    items: &[(usize, &Bound)],
    lower: bool,
) -> Result<Vec<VarId>> {
    let y: Vec<VarId> = (0..rf.rows().len()).map(|r| sys.add_nonneg(var_name(rf, "y", r, true))).collect();
    let mut cols: Vec<Vec<(VarId, N)>> = vec![Vec::new(); rf.columns().len()];
    for (r, row) in mats.a.iter().enumerate() {
        for (c, v) in row {
            cols[*c].push((y[r], v.clone()));
        }
    }
    for (c, terms) in cols.into_iter().enumerate() {
        let rel = if lower { Relation::Le } else { Relation::Ge };
        sys.add_constraint(var_name(rf, "flow", c, false), terms, rel, mats.delta[c].clone());
    }
    for &(i, b) in items {
        let terms = (0..y.len()).map(|r| (y[r], mats.t[r][i].clone())).collect();
        sys.add_constraint(format!("objective[{i}]"), terms, relation(b.op), N::from_value(&b.value)?);
    }
    Ok(y)
}

/// Adds the `(x, z)` system for a uniform operator. Returns `(x, z)`.
pub(crate) fn add_forall_or_rows<N: Scalar>(
    sys: &mut LinSystem<N>,
    rf: &ReachForm,
    mats: &ReachMatrices<N>,
    bounds: &[Bound],
    op: CmpOp,
) -> Result<(Vec<VarId>, Vec<VarId>)> {
    let lower = op.is_lower();
    let x: Vec<VarId> = (0..rf.columns().len())
        .map(|c| {
            let name = var_name(rf, "x", c, false);
            if lower {
                sys.add_nonneg(name)
            } else {
                sys.add_free(name)
            }
        })
        .collect();
    let z: Vec<VarId> = (0..bounds.len()).map(|i| sys.add_nonneg(format!("z[{i}]"))).collect();
    for (r, row) in mats.a.iter().enumerate() {
        let mut terms: Vec<(VarId, N)> = row.iter().map(|(c, v)| (x[*c], v.clone())).collect();
        for (i, zi) in z.iter().enumerate() {
            terms.push((*zi, -mats.t[r][i].clone()));
        }
        let rel = if lower { Relation::Le } else { Relation::Ge };
        sys.add_constraint(var_name(rf, "pair", r, true), terms, rel, N::zero());
    }
    let mut init: Vec<(VarId, N)> = (0..x.len()).map(|c| (x[c], mats.delta[c].clone())).collect();
    for (i, b) in bounds.iter().enumerate() {
        init.push((z[i], -N::from_value(&b.value)?));
    }
    sys.add_constraint("initial", init, relation(op), N::zero());
    let sum = z.iter().map(|&v| (v, N::one())).collect();
    let rel = if op.is_strict() { Relation::Le } else { Relation::Eq };
    sys.add_constraint("sum z", sum, rel, N::one());
    Ok((x, z))
}

/// Adds the single-objective `x_i` system for a universal predicate.
fn add_forall_single_rows<N: Scalar>(
    sys: &mut LinSystem<N>,
    rf: &ReachForm,
    mats: &ReachMatrices<N>,
    i: usize,
    b: &Bound,
) -> Result<Vec<VarId>> {
    let x: Vec<VarId> = (0..rf.columns().len()).map(|c| sys.add_free(var_name(rf, "x", c, false))).collect();
    for (r, row) in mats.a.iter().enumerate() {
        let terms = row.iter().map(|(c, v)| (x[*c], v.clone())).collect();
        let rel = if b.op.is_lower() { Relation::Le } else { Relation::Ge };
        sys.add_constraint(var_name(rf, "pair", r, true), terms, rel, mats.t[r][i].clone());
    }
    let init = (0..x.len()).map(|c| (x[c], mats.delta[c].clone())).collect();
    sys.add_constraint("initial", init, relation(b.op), N::from_value(&b.value)?);
    Ok(x)
}

fn uniform_direction(bounds: &[Bound]) -> Result<bool> {
    let lower = bounds.first().map_or(true, |b| b.op.is_lower());
    if bounds.iter().any(|b| b.op.is_lower() != lower) {
        return Err(Error::UnsupportedQuery("mixed lower and upper bounds in one system".into()));
    }
    Ok(lower)
}

fn uniform_op(bounds: &[Bound]) -> Result<CmpOp> {
    let op = bounds.first().map_or(CmpOp::Ge, |b| b.op);
    if bounds.iter().any(|b| b.op != op) {
        return Err(Error::UnsupportedQuery("a (forall, or) query needs one operator for all predicates".into()));
    }
    Ok(op)
}

fn check_shape(rf: &ReachForm, q: &ReachQuery) -> Result<()> {
    if q.bounds.len() != rf.num_objectives() {
        return Err(Error::ShapeMismatch(format!(
            "query has {} bounds for {} objectives",
            q.bounds.len(),
            rf.num_objectives()
        )));
    }
    Ok(())
}

/// `∃σ. ⋀ Pr(◇G_i) op_i λ_i`.
pub fn build_exists_and<N: Scalar>(rf: &ReachForm, bounds: &[Bound]) -> Result<LinSystem<N>> {
    let lower = uniform_direction(bounds)?;
    if !lower {
        require_ec_free(rf)?;
    }
    let mats = build_reach_matrices::<N>(rf)?;
    let mut sys = LinSystem::new();
    let items: Vec<(usize, &Bound)> = bounds.iter().enumerate().collect();
    add_exists_rows(&mut sys, rf, &mats, &items, lower)?;
    Ok(sys)
}

/// `∀σ. ⋁ Pr(◇G_i) op λ_i` for one operator `op`.
pub fn build_forall_or<N: Scalar>(rf: &ReachForm, bounds: &[Bound]) -> Result<LinSystem<N>> {
    let op = uniform_op(bounds)?;
    if op.is_lower() {
        require_ec_free(rf)?;
    }
    let mats = build_reach_matrices::<N>(rf)?;
    let mut sys = LinSystem::new();
    add_forall_or_rows(&mut sys, rf, &mats, bounds, op)?;
    Ok(sys)
}

/// One single-objective system per disjunct.
pub fn build_exists_or<N: Scalar>(rf: &ReachForm, bounds: &[Bound]) -> Result<Vec<LinSystem<N>>> {
    (0..bounds.len()).map(|i| build_exists_single(rf, i, &bounds[i])).collect()
}

fn build_exists_single<N: Scalar>(rf: &ReachForm, i: usize, b: &Bound) -> Result<LinSystem<N>> {
    if !b.op.is_lower() {
        require_ec_free(rf)?;
    }
    let mats = build_reach_matrices::<N>(rf)?;
    let mut sys = LinSystem::new();
    add_exists_rows(&mut sys, rf, &mats, &[(i, b)], b.op.is_lower())?;
    Ok(sys)
}

/// One single-objective system per conjunct.
pub fn build_forall_and<N: Scalar>(rf: &ReachForm, bounds: &[Bound]) -> Result<Vec<LinSystem<N>>> {
    (0..bounds.len()).map(|i| build_forall_single(rf, i, &bounds[i])).collect()
}

fn build_forall_single<N: Scalar>(rf: &ReachForm, i: usize, b: &Bound) -> Result<LinSystem<N>> {
    if b.op.is_lower() {
        require_ec_free(rf)?;
    }
    let mats = build_reach_matrices::<N>(rf)?;
    let mut sys = LinSystem::new();
    add_forall_single_rows(&mut sys, rf, &mats, i, b)?;
    Ok(sys)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
}

/// Outcome of [`certify`]: the certificate is for `query`, which is either the
/// input query (`Holds`) or its negation (`Violated`).
#[derive(Clone, Debug)]
pub struct Certified {
    pub verdict: Verdict,
    pub query: ReachQuery,
    pub certificate: ReachCertificate<f64>,
}

/// Finds a certificate for `q`, `Ok(None)` when the solver proves there is none.
pub fn find_certificate(
    rf: &ReachForm,
    q: &ReachQuery,
    solver: &dyn LpSolver,
    limits: &SolveLimits,
) -> Result<Option<ReachCertificate<f64>>> {
    check_shape(rf, q)?;
    let k = q.bounds.len();
    let n_rows = rf.rows().len();
    let n_cols = rf.columns().len();
    let run = |sys: LinSystem<f64>| -> Result<Option<Vec<f64>>> {
        let out = solve(solver, &sys, limits)?;
        match out.status {
            SolveStatus::Optimal | SolveStatus::Feasible => Ok(out.values),
            SolveStatus::Infeasible => Ok(None),
            SolveStatus::Unbounded => Err(Error::SolverUnknown("feasibility system reported unbounded".into())),
            SolveStatus::Unknown(r) => Err(Error::SolverUnknown(r)),
        }
    };
    let cert = match QueryType::of(q.quantifier, q.connective) {
        QueryType::ExistsAnd => {
            let kept: Vec<Bound> = q.bounds.iter().filter(|b| !is_trivial(b)).cloned().collect();
            if kept.is_empty() {
                Some(ReachCertificate::ExistsAnd { y: vec![0.0; n_rows] })
            } else {
                let lower = uniform_direction(&q.bounds)?;
                if !lower {
                    require_ec_free(rf)?;
                }
                let mats = build_reach_matrices::<f64>(rf)?;
                let mut sys = LinSystem::new();
                let items: Vec<(usize, &Bound)> =
                    q.bounds.iter().enumerate().filter(|(_, b)| !is_trivial(b)).collect();
                add_exists_rows(&mut sys, rf, &mats, &items, lower)?;
                run(sys)?.map(|y| ReachCertificate::ExistsAnd { y })
            }
        }
        QueryType::ForallOr => {
            if let Some(i) = q.bounds.iter().position(is_trivial) {
                let mut z = vec![0.0; k];
                z[i] = 1.0;
                Some(ReachCertificate::ForallOr { x: vec![0.0; n_cols], z })
            } else {
                run(build_forall_or(rf, &q.bounds)?)?.map(|v| ReachCertificate::ForallOr {
                    x: v[..n_cols].to_vec(),
                    z: v[n_cols..].to_vec(),
                })
            }
        }
        QueryType::ExistsOr => {
            let mut found = None;
            for (i, b) in q.bounds.iter().enumerate() {
                if is_trivial(b) {
                    found = Some(ReachCertificate::ExistsOr { index: i, y: vec![0.0; n_rows] });
                    break;
                }
                if let Some(y) = run(build_exists_single(rf, i, b)?)? {
                    found = Some(ReachCertificate::ExistsOr { index: i, y });
                    break;
                }
            }
            found
        }
        QueryType::ForallAnd => {
            let mut xs = Vec::with_capacity(k);
            for (i, b) in q.bounds.iter().enumerate() {
                if is_trivial(b) {
                    xs.push(vec![0.0; n_cols]);
                    continue;
                }
                match run(build_forall_single(rf, i, b)?)? {
                    Some(x) => xs.push(x),
                    None => return Ok(None),
                }
            }
            Some(ReachCertificate::ForallAnd { xs })
        }
    };
    Ok(cert)
}

/// Decides `q` by certifying either `q` or its negation.
///
/// Infeasibility of one side is only trusted once the other side has a
/// certificate that passes the checker; otherwise the result is
/// [`Error::SolverUnknown`].
pub fn certify(rf: &ReachForm, q: &ReachQuery, solver: &dyn LpSolver, limits: &SolveLimits) -> Result<Certified> {
    let mut reasons = Vec::new();
    for (verdict, query) in [(Verdict::Holds, q.clone()), (Verdict::Violated, q.negate())] {
        match find_certificate(rf, &query, solver, limits) {
            Ok(Some(cert)) => {
                let report = check_tolerance(rf, &query, &cert, CERT_TOL)?;
                if report.is_ok() {
                    return Ok(Certified { verdict, query, certificate: cert });
                }
                reasons.push(format!("certificate failed its check: {:?}", report.violations));
            }
            Ok(None) => reasons.push(format!("{verdict:?}: infeasible")),
            Err(Error::SolverUnknown(r)) => reasons.push(r),
            Err(e) => return Err(e),
        }
    }
    Err(Error::SolverUnknown(reasons.join("; ")))
}

/// Re-evaluates the defining inequalities of `cert` for `q`.
pub fn check_certificate<N: Scalar>(
    rf: &ReachForm,
    q: &ReachQuery,
    cert: &ReachCertificate<N>,
    slack: &N,
    strict_slack: &N,
) -> Result<CheckReport> {
    check_shape(rf, q)?;
    let want = QueryType::of(q.quantifier, q.connective);
    if cert.query_type() != want {
        return Err(Error::ShapeMismatch(format!("{} certificate for a {} query", cert.query_type().tag(), want.tag())));
    }
    let (n_rows, n_cols, k) = (rf.rows().len(), rf.columns().len(), q.bounds.len());
    let len = |what: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("{what} has length {got}, expected {want}")))
        }
    };
    match cert {
        ReachCertificate::ExistsAnd { y } => {
            len("y", y.len(), n_rows)?;
            check_assignment(&build_exists_and::<N>(rf, &q.bounds)?, y, slack, strict_slack)
        }
        ReachCertificate::ForallOr { x, z } => {
            len("x", x.len(), n_cols)?;
            len("z", z.len(), k)?;
            let values: Vec<N> = x.iter().chain(z).cloned().collect();
            check_assignment(&build_forall_or::<N>(rf, &q.bounds)?, &values, slack, strict_slack)
        }
        ReachCertificate::ExistsOr { index, y } => {
            if *index >= k {
                return Err(Error::ShapeMismatch(format!("disjunct {index} out of range")));
            }
            len("y", y.len(), n_rows)?;
            check_assignment(&build_exists_single::<N>(rf, *index, &q.bounds[*index])?, y, slack, strict_slack)
        }
        ReachCertificate::ForallAnd { xs } => {
            len("xs", xs.len(), k)?;
            let mut report = CheckReport::default();
            for (i, x) in xs.iter().enumerate() {
                len("x", x.len(), n_cols)?;
                let b = &q.bounds[i];
                if is_trivial(b) && x.iter().all(|v| v.is_zero()) {
                    continue;
                }
                let mut r = check_assignment(&build_forall_single::<N>(rf, i, b)?, x, slack, strict_slack)?;
                for v in r.violations.iter_mut() {
                    v.id = format!("conjunct {i}: {}", v.id);
                }
                report.merge(r);
            }
            Ok(report)
        }
    }
}

/// Floating-point check with tolerance `eps`.
pub fn check_tolerance(rf: &ReachForm, q: &ReachQuery, cert: &ReachCertificate<f64>, eps: f64) -> Result<CheckReport> {
    check_certificate(rf, q, cert, &eps, &eps.min(STRICT_EPS))
}

/// Exact rational check; the model must be exact.
pub fn check_exact(rf: &ReachForm, q: &ReachQuery, cert: &ReachCertificate<Rational>) -> Result<CheckReport> {
    let zero = Rational::from_i64(0);
    check_certificate(rf, q, cert, &zero, &zero)
}
