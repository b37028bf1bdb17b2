//! Farkas certificates for multi-objective mean-payoff queries.
//!
//! `∃σ. ⋀ E[mp_inf(r_i)] ≥ λ_i` is witnessed by recurrent/transient flows
//! `(x, y)` plus redirected mass `z`; `∀σ. ⋁ E[mp_sup(r_i)] ≥ λ_i` by a
//! gain/bias pair `(g, b)` and a weight vector `z`. Strict bounds use the
//! same polyhedra with strict objective (resp. initial) rows.

use crate::error::{Error, Result};
use crate::graph::mec_decomposition;
use crate::lp::{
    check_assignment, solve, CheckReport, LinSystem, LpSolver, Relation, SolveLimits, SolveStatus, VarId,
    STRICT_EPS,
};
use crate::model::{min_value, Mdp};
use crate::query::{
    normalize_lower_bounds, Bound, CmpOp, Connective, Flavor, PredicateKind, Quantifier, Query,
};
use crate::reach_cert::{QueryType, Verdict, CERT_TOL};
use crate::value::{Rational, Scalar, Value};

/// A mean-payoff query with every predicate rewritten to a lower bound.
///
/// Reward vectors are already signed, so bound `i` constrains
/// `E[mp(rewards[i])]`. Existential conjunctions are over `mp_inf`,
/// universal disjunctions over `mp_sup`.
#[derive(Clone, Debug, PartialEq)]
pub struct MpQuery {
    pub quantifier: Quantifier,
    pub connective: Connective,
    pub rewards: Vec<Vec<Value>>,
    pub bounds: Vec<Bound>,
    /// Reward name behind each vector and whether it was negated.
    pub sources: Vec<(String, bool)>,
}

impl MpQuery {
    /// Resolves reward names against `mdp` and normalizes the bounds.
    pub fn new(mdp: &Mdp, q: &Query) -> Result<MpQuery> {
        let q = normalize_lower_bounds(q);
        let mut rewards = Vec::new();
        let mut bounds = Vec::new();
        let mut flavors = Vec::new();
        let mut sources = Vec::new();
        for p in &q.predicates {
            let PredicateKind::MeanPayoff { reward, flavor, negated } = &p.kind else {
                return Err(Error::InvalidQuery("not a mean-payoff query".into()));
            };
            let r = mdp
                .reward(reward)
                .ok_or_else(|| Error::InvalidQuery(format!("unknown reward `{reward}`")))?;
            rewards.push(if *negated { r.values.iter().map(Value::neg).collect() } else { r.values.clone() });
            bounds.push(Bound { op: p.op, value: p.bound.clone() });
            flavors.push(*flavor);
            sources.push((reward.clone(), *negated));
        }
        if bounds.is_empty() {
            return Err(Error::InvalidQuery("query has no predicates".into()));
        }
        let want = match (q.quantifier, q.connective) {
            (Quantifier::Exists, Connective::And) => Some(Flavor::Liminf),
            (Quantifier::Forall, Connective::Or) => Some(Flavor::Limsup),
            _ => None,
        };
        if let Some(f) = want {
            if bounds.len() > 1 && flavors.iter().any(|g| *g != f) {
                return Err(Error::UnsupportedQuery(format!(
                    "{} mean-payoff queries with several predicates need {} after normalization",
                    QueryType::of(q.quantifier, q.connective).tag(),
                    if f == Flavor::Liminf { "liminf" } else { "limsup" }
                )));
            }
        }
        Ok(MpQuery { quantifier: q.quantifier, connective: q.connective, rewards, bounds, sources })
    }

    pub fn query_type(&self) -> QueryType {
        QueryType::of(self.quantifier, self.connective)
    }

    /// Negation, again in lower-bound form: `E[mp(r)] ≥ λ` becomes
    /// `E[mp(-r)] > -λ` and `>` becomes `≥`.
    pub fn negate(&self) -> MpQuery {
        MpQuery {
            quantifier: match self.quantifier {
                Quantifier::Exists => Quantifier::Forall,
                Quantifier::Forall => Quantifier::Exists,
            },
            connective: match self.connective {
                Connective::And => Connective::Or,
                Connective::Or => Connective::And,
            },
            rewards: self.rewards.iter().map(|r| r.iter().map(Value::neg).collect()).collect(),
            bounds: self
                .bounds
                .iter()
                .map(|b| Bound { op: b.op.complement().flip(), value: b.value.neg() })
                .collect(),
            sources: self.sources.iter().map(|(n, neg)| (n.clone(), !neg)).collect(),
        }
    }

    /// Restriction to one predicate.
    pub fn single(&self, i: usize) -> MpQuery {
        MpQuery {
            quantifier: self.quantifier,
            connective: self.connective,
            rewards: vec![self.rewards[i].clone()],
            bounds: vec![self.bounds[i].clone()],
            sources: vec![self.sources[i].clone()],
        }
    }
}

/// `r_min(i)`: the smallest reward of objective `i` over all pairs.
pub fn build_r_min(rewards: &[Vec<Value>]) -> Vec<Value> {
    rewards.iter().map(|r| min_value(r).cloned().unwrap_or_else(Value::zero)).collect()
}

/// Flows of the existential system: `x`, `y` per pair, `z` per state.
#[derive(Clone, Debug, PartialEq)]
pub struct Flows<N> {
    pub x: Vec<N>,
    pub y: Vec<N>,
    pub z: Vec<N>,
}

/// Gain and bias per state, weights per objective.
#[derive(Clone, Debug, PartialEq)]
pub struct GainBias<N> {
    pub g: Vec<N>,
    pub b: Vec<N>,
    pub z: Vec<N>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MpCertificate<N> {
    ExistsAnd(Flows<N>),
    ForallOr(GainBias<N>),
    ExistsOr { index: usize, flows: Flows<N> },
    ForallAnd(Vec<GainBias<N>>),
}

impl<N: Clone> MpCertificate<N> {
    pub fn query_type(&self) -> QueryType {
        match self {
            MpCertificate::ExistsAnd(_) => QueryType::ExistsAnd,
            MpCertificate::ForallOr(_) => QueryType::ForallOr,
            MpCertificate::ExistsOr { .. } => QueryType::ExistsOr,
            MpCertificate::ForallAnd(_) => QueryType::ForallAnd,
        }
    }

    pub fn map<M>(&self, f: impl Fn(&N) -> M) -> MpCertificate<M> {
        let m = |v: &Vec<N>| v.iter().map(&f).collect::<Vec<M>>();
        let fl = |c: &Flows<N>| Flows { x: m(&c.x), y: m(&c.y), z: m(&c.z) };
        let gb = |c: &GainBias<N>| GainBias { g: m(&c.g), b: m(&c.b), z: m(&c.z) };
        match self {
            MpCertificate::ExistsAnd(c) => MpCertificate::ExistsAnd(fl(c)),
            MpCertificate::ForallOr(c) => MpCertificate::ForallOr(gb(c)),
            MpCertificate::ExistsOr { index, flows } => MpCertificate::ExistsOr { index: *index, flows: fl(flows) },
            MpCertificate::ForallAnd(cs) => MpCertificate::ForallAnd(cs.iter().map(gb).collect()),
        }
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

fn require_lower(bounds: &[Bound]) -> Result<()> {
    if bounds.iter().all(|b| b.op.is_lower()) {
        Ok(())
    } else {
        Err(Error::InvalidQuery("mean-payoff systems take lower bounds only".into()))
    }
}

fn check_rewards(mdp: &Mdp, rewards: &[Vec<Value>], bounds: &[Bound]) -> Result<()> {
    if rewards.len() != bounds.len() {
        return Err(Error::ShapeMismatch(format!("{} reward vectors for {} bounds", rewards.len(), bounds.len())));
    }
    if let Some(r) = rewards.iter().find(|r| r.len() != mdp.num_pairs()) {
        return Err(Error::ShapeMismatch(format!("reward vector of length {} for {} pairs", r.len(), mdp.num_pairs())));
    }
    Ok(())
}

/// Variables of the existential system, as added by [`add_hmp_rows`].
pub(crate) struct HmpVars {
    pub x: Vec<VarId>,
    pub y: Vec<VarId>,
}

pub(crate) fn add_hmp_rows<N: Scalar>(
    sys: &mut LinSystem<N>,
    mdp: &Mdp,
    rewards: &[Vec<Value>],
    bounds: &[Bound],
) -> Result<HmpVars> {
    check_rewards(mdp, rewards, bounds)?;
    require_lower(bounds)?;
    let n = mdp.num_states();
    let x: Vec<VarId> = (0..mdp.num_pairs()).map(|p| sys.add_nonneg(format!("x[{}]", mdp.pair_name(p)))).collect();
    let y: Vec<VarId> = (0..mdp.num_pairs()).map(|p| sys.add_nonneg(format!("y[{}]", mdp.pair_name(p)))).collect();
    let z: Vec<VarId> = (0..n).map(|s| sys.add_nonneg(format!("z[{}]", mdp.state_name(s)))).collect();
    let mut transient: Vec<Vec<(VarId, N)>> = vec![Vec::new(); n];
    let mut recurrent: Vec<Vec<(VarId, N)>> = vec![Vec::new(); n];
    for p in 0..mdp.num_pairs() {
        let s = mdp.pair_state(p);
        transient[s].push((y[p], N::one()));
        transient[s].push((x[p], N::one()));
        recurrent[s].push((x[p], N::one()));
        for (t, pr) in mdp.successors_as::<N>(p)? {
            transient[t].push((y[p], -pr.clone()));
            recurrent[t].push((x[p], -pr));
        }
    }
    let mut delta = vec![N::zero(); n];
    for (s, v) in mdp.initial() {
        delta[*s] = N::from_value(v)?;
    }
    for s in 0..n {
        let mut terms = std::mem::take(&mut transient[s]);
        terms.push((z[s], N::one()));
        let name = mdp.state_name(s);
        sys.add_constraint(format!("transient[{name}]"), terms, Relation::Eq, delta[s].clone());
        sys.add_constraint(format!("recurrent[{name}]"), std::mem::take(&mut recurrent[s]), Relation::Eq, N::zero());
    }
    let rmin = build_r_min(rewards);
    for (i, b) in bounds.iter().enumerate() {
        let mut terms = Vec::new();
        for p in 0..mdp.num_pairs() {
            terms.push((x[p], N::from_value(&rewards[i][p])?));
        }
        let m = N::from_value(&rmin[i])?;
        for &zs in &z {
            terms.push((zs, m.clone()));
        }
        sys.add_constraint(format!("objective[{i}]"), terms, relation(b.op), N::from_value(&b.value)?);
    }
    Ok(HmpVars { x, y })
}

/// Variables of the universal system, as added by [`add_fmp_rows`].
pub(crate) struct FmpVars {
    pub g: Vec<VarId>,
    pub z: Vec<VarId>,
}

pub(crate) fn add_fmp_rows<N: Scalar>(
    sys: &mut LinSystem<N>,
    mdp: &Mdp,
    rewards: &[Vec<Value>],
    bounds: &[Bound],
) -> Result<FmpVars> {
    check_rewards(mdp, rewards, bounds)?;
    require_lower(bounds)?;
    let op = bounds[0].op;
    if bounds.iter().any(|b| b.op != op) {
        return Err(Error::UnsupportedQuery("a (forall, or) query needs one operator for all predicates".into()));
    }
    let n = mdp.num_states();
    let k = bounds.len();
    let g: Vec<VarId> = (0..n).map(|s| sys.add_free(format!("g[{}]", mdp.state_name(s)))).collect();
    let b: Vec<VarId> = (0..n).map(|s| sys.add_free(format!("b[{}]", mdp.state_name(s)))).collect();
    let z: Vec<VarId> = (0..k).map(|i| sys.add_nonneg(format!("z[{i}]"))).collect();
    for p in 0..mdp.num_pairs() {
        let s = mdp.pair_state(p);
        let succ = mdp.successors_as::<N>(p)?;
        let mut gain = vec![(g[s], N::one())];
        let mut bias = vec![(g[s], N::one()), (b[s], N::one())];
        for (t, pr) in succ {
            gain.push((g[t], -pr.clone()));
            bias.push((b[t], -pr));
        }
        for i in 0..k {
            bias.push((z[i], -N::from_value(&rewards[i][p])?));
        }
        let name = mdp.pair_name(p);
        sys.add_constraint(format!("gain[{name}]"), gain, Relation::Le, N::zero());
        sys.add_constraint(format!("bias[{name}]"), bias, Relation::Le, N::zero());
    }
    let rmin = build_r_min(rewards);
    for s in 0..n {
        let mut terms = vec![(g[s], N::one())];
        for i in 0..k {
            terms.push((z[i], -N::from_value(&rmin[i])?));
        }
        sys.add_constraint(format!("floor[{}]", mdp.state_name(s)), terms, Relation::Ge, N::zero());
    }
    let mut init = Vec::new();
    for (s, v) in mdp.initial() {
        init.push((g[*s], N::from_value(v)?));
    }
    for (i, bd) in bounds.iter().enumerate() {
        init.push((z[i], -N::from_value(&bd.value)?));
    }
    sys.add_constraint("initial", init, relation(op), N::zero());
    sys.add_constraint("sum z", z.iter().map(|&v| (v, N::one())).collect(), Relation::Eq, N::one());
    Ok(FmpVars { g, z })
}

/// The existential polyhedron for lower bounds `bounds` on `rewards`.
pub fn build_hmp<N: Scalar>(mdp: &Mdp, rewards: &[Vec<Value>], bounds: &[Bound]) -> Result<LinSystem<N>> {
    let mut sys = LinSystem::new();
    add_hmp_rows(&mut sys, mdp, rewards, bounds)?;
    Ok(sys)
}

/// The universal polyhedron for lower bounds `bounds` on `rewards`.
pub fn build_fmp<N: Scalar>(mdp: &Mdp, rewards: &[Vec<Value>], bounds: &[Bound]) -> Result<LinSystem<N>> {
    let mut sys = LinSystem::new();
    add_fmp_rows(&mut sys, mdp, rewards, bounds)?;
    Ok(sys)
}

fn split_flows(mdp: &Mdp, v: Vec<f64>) -> Flows<f64> {
    let e = mdp.num_pairs();
    Flows { x: v[..e].to_vec(), y: v[e..2 * e].to_vec(), z: v[2 * e..].to_vec() }
}

fn split_gain(mdp: &Mdp, v: Vec<f64>) -> GainBias<f64> {
    let n = mdp.num_states();
    GainBias { g: v[..n].to_vec(), b: v[n..2 * n].to_vec(), z: v[2 * n..].to_vec() }
}

/// Finds a certificate for `q`, `Ok(None)` when the solver proves there is none.
pub fn find_mp_certificate(
    mdp: &Mdp,
    q: &MpQuery,
    solver: &dyn LpSolver,
    limits: &SolveLimits,
) -> Result<Option<MpCertificate<f64>>> {
    let run = |sys: LinSystem<f64>| -> Result<Option<Vec<f64>>> {
        let out = solve(solver, &sys, limits)?;
        match out.status {
            SolveStatus::Optimal | SolveStatus::Feasible => Ok(out.values),
            SolveStatus::Infeasible => Ok(None),
            SolveStatus::Unbounded => Err(Error::SolverUnknown("feasibility system reported unbounded".into())),
            SolveStatus::Unknown(r) => Err(Error::SolverUnknown(r)),
        }
    };
    let cert = match q.query_type() {
        QueryType::ExistsAnd => {
            run(build_hmp(mdp, &q.rewards, &q.bounds)?)?.map(|v| MpCertificate::ExistsAnd(split_flows(mdp, v)))
        }
        QueryType::ForallOr => {
            run(build_fmp(mdp, &q.rewards, &q.bounds)?)?.map(|v| MpCertificate::ForallOr(split_gain(mdp, v)))
        }
        QueryType::ExistsOr => {
            let mut found = None;
            for i in 0..q.bounds.len() {
                let one = q.single(i);
                if let Some(v) = run(build_hmp(mdp, &one.rewards, &one.bounds)?)? {
                    found = Some(MpCertificate::ExistsOr { index: i, flows: split_flows(mdp, v) });
                    break;
                }
            }
            found
        }
        QueryType::ForallAnd => {
            let mut parts = Vec::new();
            for i in 0..q.bounds.len() {
                let one = q.single(i);
                match run(build_fmp(mdp, &one.rewards, &one.bounds)?)? {
                    Some(v) => parts.push(split_gain(mdp, v)),
                    None => return Ok(None),
                }
            }
            Some(MpCertificate::ForallAnd(parts))
        }
    };
    Ok(cert)
}

#[derive(Clone, Debug)]
pub struct MpCertified {
    pub verdict: Verdict,
    pub query: MpQuery,
    pub certificate: MpCertificate<f64>,
}

/// Pairs outside every MEC that carry recurrent flow above `tol`.
pub fn recurrent_outside_mecs(mdp: &Mdp, x: &[f64], tol: f64) -> Vec<usize> {
    let mut in_mec = vec![false; mdp.num_pairs()];
    for m in mec_decomposition(mdp) {
        for &p in &m.pairs {
            in_mec[p] = true;
        }
    }
    (0..mdp.num_pairs()).filter(|&p| !in_mec[p] && x[p] > tol).collect()
}

fn constant_verdict(q: &MpQuery) -> Option<Verdict> {
    let mut values = Vec::new();
    for r in &q.rewards {
        let first = r.first()?;
        if r.iter().any(|v| v.approx() != first.approx()) {
            return None;
        }
        values.push(first.approx());
    }
    let mut sat = q.bounds.iter().zip(&values).map(|(b, c)| b.op.holds(*c, b.value.approx()));
    let holds = match q.connective {
        Connective::And => sat.all(|x| x),
        Connective::Or => sat.any(|x| x),
    };
    Some(if holds { Verdict::Holds } else { Verdict::Violated })
}

/// Decides `q` by certifying either `q` or its negation.
pub fn certify_mp(mdp: &Mdp, q: &MpQuery, solver: &dyn LpSolver, limits: &SolveLimits) -> Result<MpCertified> {
    let mut reasons = Vec::new();
    let mut found = None;
    for (verdict, query) in [(Verdict::Holds, q.clone()), (Verdict::Violated, q.negate())] {
        match find_mp_certificate(mdp, &query, solver, limits) {
            Ok(Some(cert)) => {
                let report = check_mp_tolerance(mdp, &query, &cert, CERT_TOL)?;
                if report.is_ok() {
                    found = Some(MpCertified { verdict, query, certificate: cert });
                    break;
                }
                reasons.push(format!("certificate failed its check: {:?}", report.violations));
            }
            Ok(None) => reasons.push(format!("{verdict:?}: infeasible")),
            Err(Error::SolverUnknown(r)) => reasons.push(r),
            Err(e) => return Err(e),
        }
    }
    let found = found.ok_or_else(|| Error::SolverUnknown(reasons.join("; ")))?;
    let flows = match &found.certificate {
        MpCertificate::ExistsAnd(f) | MpCertificate::ExistsOr { flows: f, .. } => Some(f),
        _ => None,
    };
    if let Some(f) = flows {
        let bad = recurrent_outside_mecs(mdp, &f.x, CERT_TOL);
        if !bad.is_empty() {
            return Err(Error::Numerical(format!(
                "recurrent flow outside end components at {}",
                mdp.pair_name(bad[0])
            )));
        }
    }
    if let Some(v) = constant_verdict(q) {
        if v != found.verdict {
            return Err(Error::Numerical(format!("constant rewards decide {v:?}, the LP decided {:?}", found.verdict)));
        }
    }
    Ok(found)
}

/// Re-evaluates the rows of `cert` for `q`.
pub fn check_mp_certificate<N: Scalar>(
    mdp: &Mdp,
    q: &MpQuery,
    cert: &MpCertificate<N>,
    slack: &N,
    strict_slack: &N,
) -> Result<CheckReport> {
    if cert.query_type() != q.query_type() {
        return Err(Error::ShapeMismatch(format!(
            "{} certificate for a {} query",
            cert.query_type().tag(),
            q.query_type().tag()
        )));
    }
    let (n, e, k) = (mdp.num_states(), mdp.num_pairs(), q.bounds.len());
    let len = |what: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("{what} has length {got}, expected {want}")))
        }
    };
    let flows = |f: &Flows<N>, rewards: &[Vec<Value>], bounds: &[Bound]| -> Result<CheckReport> {
        len("x", f.x.len(), e)?;
        len("y", f.y.len(), e)?;
        len("z", f.z.len(), n)?;
        let values: Vec<N> = f.x.iter().chain(&f.y).chain(&f.z).cloned().collect();
        check_assignment(&build_hmp::<N>(mdp, rewards, bounds)?, &values, slack, strict_slack)
    };
    let gains = |c: &GainBias<N>, rewards: &[Vec<Value>], bounds: &[Bound]| -> Result<CheckReport> {
        len("g", c.g.len(), n)?;
        len("b", c.b.len(), n)?;
        len("z", c.z.len(), bounds.len())?;
        let values: Vec<N> = c.g.iter().chain(&c.b).chain(&c.z).cloned().collect();
        check_assignment(&build_fmp::<N>(mdp, rewards, bounds)?, &values, slack, strict_slack)
    };
    match cert {
        MpCertificate::ExistsAnd(f) => flows(f, &q.rewards, &q.bounds),
        MpCertificate::ForallOr(c) => gains(c, &q.rewards, &q.bounds),
        MpCertificate::ExistsOr { index, flows: f } => {
            if *index >= k {
                return Err(Error::ShapeMismatch(format!("disjunct {index} out of range")));
            }
            let one = q.single(*index);
            flows(f, &one.rewards, &one.bounds)
        }
        MpCertificate::ForallAnd(parts) => {
            len("parts", parts.len(), k)?;
            let mut report = CheckReport::default();
            for (i, c) in parts.iter().enumerate() {
                let one = q.single(i);
                let mut r = gains(c, &one.rewards, &one.bounds)?;
                for v in r.violations.iter_mut() {
                    v.id = format!("conjunct {i}: {}", v.id);
                }
                report.merge(r);
            }
            Ok(report)
        }
    }
}

pub fn check_mp_tolerance(mdp: &Mdp, q: &MpQuery, cert: &MpCertificate<f64>, eps: f64) -> Result<CheckReport> {
    check_mp_certificate(mdp, q, cert, &eps, &eps.min(STRICT_EPS))
}

pub fn check_mp_exact(mdp: &Mdp, q: &MpQuery, cert: &MpCertificate<Rational>) -> Result<CheckReport> {
    let zero = Rational::from_i64(0);
    check_mp_certificate(mdp, q, cert, &zero, &zero)
}
