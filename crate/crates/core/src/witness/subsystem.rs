//! Witnessing subsystems from certificate supports and support-minimizing MILPs.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::lp::{indicator_big_m, solve_with_start, LinSystem, LpSolver, Relation, Sense, SolveLimits, SolveStatus, VarId};
use crate::model::{build_reach_matrices, induced_subsystem, max_value, min_value, Mdp, ReachForm, RewardVector, Subsystem};
use crate::mp_cert::{add_fmp_rows, add_hmp_rows, build_r_min, certify_mp, find_mp_certificate, MpCertificate, MpQuery};
use crate::product::{reduce_query_on_subsystem, ProductOptions, ReducedQuery};
use crate::query::{Bound, CmpOp};
use crate::reach_cert::{
    add_exists_rows, add_forall_or_rows, certify, find_certificate, QueryType, ReachCertificate, Verdict,
};
use crate::query::ReachQuery;

/// Entries at or below this count as zero when taking supports.
pub const SUPPORT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    /// The MEC quotient of the product.
    Quotient,
    /// The model the query was posed on.
    Original,
}

impl Level {
    pub fn tag(self) -> &'static str {
        match self {
            Level::Quotient => "quotient",
            Level::Original => "original",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimality {
    /// The MILP was solved to optimality.
    Proven,
    /// A limit was hit; the incumbent has this relative gap.
    Incumbent { gap: f64 },
    /// No minimality claim.
    Heuristic,
}

/// The query the subsystem was re-certified on, with its certificate.
#[derive(Clone, Debug)]
pub enum Witnessed {
    Reach { reach_form: ReachForm, query: ReachQuery, certificate: ReachCertificate<f64> },
    Mp { query: MpQuery, certificate: MpCertificate<f64> },
}

#[derive(Clone, Debug)]
pub struct WitnessSubsystem {
    pub level: Level,
    /// Kept states, as indices of the model at `level`.
    pub kept: Vec<usize>,
    pub subsystem: Subsystem,
    pub witnessed: Witnessed,
    pub optimality: Optimality,
    /// Number of states of the model at `level`.
    pub total_states: usize,
}

impl WitnessSubsystem {
    pub fn size(&self) -> usize {
        self.kept.len()
    }

    /// Kept states as a fraction of all states.
    pub fn ratio(&self) -> f64 {
        self.kept.len() as f64 / self.total_states.max(1) as f64
    }
}

fn positive(v: f64) -> bool {
    v > SUPPORT_EPS
}

/// States of `rf.mdp()` in the support of a reachability certificate.
///
/// Flow certificates contribute the states with a positive pair entry, the
/// others the states with a positive `x` entry.
pub fn reach_state_support(rf: &ReachForm, cert: &ReachCertificate<f64>) -> Vec<usize> {
    let mdp = rf.mdp();
    let mut out = BTreeSet::new();
    let mut from_y = |y: &[f64]| {
        for (r, &v) in y.iter().enumerate() {
            if positive(v) {
                out.insert(mdp.pair_state(rf.rows()[r]));
            }
        }
    };
    match cert {
        ReachCertificate::ExistsAnd { y } | ReachCertificate::ExistsOr { y, .. } => from_y(y),
        ReachCertificate::ForallOr { x, .. } => {
            out.extend(x.iter().enumerate().filter(|(_, v)| positive(**v)).map(|(c, _)| rf.columns()[c]))
        }
        ReachCertificate::ForallAnd { xs } => {
            for x in xs {
                out.extend(x.iter().enumerate().filter(|(_, v)| positive(**v)).map(|(c, _)| rf.columns()[c]));
            }
        }
    }
    out.into_iter().collect()
}

/// States in the support of a mean-payoff certificate: `supp_st(x) ∪ supp_st(y)`
/// for flows, `supp(g - R_min z)` for gain/bias certificates.
pub fn mp_state_support(mdp: &Mdp, q: &MpQuery, cert: &MpCertificate<f64>) -> Vec<usize> {
    let mut out = BTreeSet::new();
    let mut flows = |x: &[f64], y: &[f64]| {
        for p in 0..mdp.num_pairs() {
            if positive(x[p]) || positive(y[p]) {
                out.insert(mdp.pair_state(p));
            }
        }
    };
    let floor_support = |g: &[f64], z: &[f64], rewards: &[Vec<crate::value::Value>]| -> Vec<usize> {
        let rmin = build_r_min(rewards);
        let floor: f64 = z.iter().zip(&rmin).map(|(zi, m)| zi * m.approx()).sum();
        (0..g.len()).filter(|&s| positive(g[s] - floor)).collect()
    };
    match cert {
        MpCertificate::ExistsAnd(f) | MpCertificate::ExistsOr { flows: f, .. } => flows(&f.x, &f.y),
        MpCertificate::ForallOr(c) => out.extend(floor_support(&c.g, &c.z, &q.rewards)),
        MpCertificate::ForallAnd(parts) => {
            for (i, c) in parts.iter().enumerate() {
                out.extend(floor_support(&c.g, &c.z, &q.single(i).rewards));
            }
        }
    }
    out.into_iter().collect()
}

fn with_required(rf: &ReachForm, support: &[usize]) -> Vec<usize> {
    let mut kept: BTreeSet<usize> = support.iter().copied().collect();
    kept.extend(rf.objective_targets());
    kept.extend(rf.mdp().initial().iter().map(|(s, _)| *s));
    kept.into_iter().collect()
}

/// Builds the subsystem induced by `support` (plus objective targets and
/// initial states) and re-certifies `q` on it.
pub fn reach_subsystem(
    rf: &ReachForm,
    q: &ReachQuery,
    support: &[usize],
    optimality: Optimality,
    solver: &dyn LpSolver,
    limits: &SolveLimits,
) -> Result<WitnessSubsystem> {
    let kept = with_required(rf, support);
    let (sub_rf, subsystem) = rf.restrict(&kept)?;
    let c = certify(&sub_rf, q, solver, limits)?;
    if c.verdict != Verdict::Holds {
        return Err(Error::Numerical("the induced subsystem does not satisfy the query".into()));
    }
    // a witnessing subsystem implies the full model satisfies the query
    if certify(rf, q, solver, limits)?.verdict != Verdict::Holds {
        return Err(Error::Numerical("subsystem holds but the full model does not".into()));
    }
    Ok(WitnessSubsystem {
        level: Level::Quotient,
        kept,
        subsystem,
        witnessed: Witnessed::Reach { reach_form: sub_rf, query: q.clone(), certificate: c.certificate },
        optimality,
        total_states: rf.mdp().num_states(),
    })
}

/// The subsystem induced by `kept` with every signed reward vector of `q`
/// carried over; the sink collects the smallest value of each vector.
pub fn restrict_mp(mdp: &Mdp, q: &MpQuery, kept: &[usize]) -> Result<(Subsystem, MpQuery)> {
    let mut sub = induced_subsystem(mdp, kept)?;
    let sink_pair = sub.mdp.pairs(sub.sink).start;
    let orig_pair = |p: usize| -> Option<usize> {
        let s = sub.original_of[sub.mdp.pair_state(p)]?;
        mdp.pair_of(s, sub.mdp.action(p))
    };
    let rewards: Vec<Vec<crate::value::Value>> = q
        .rewards
        .iter()
        .map(|r| {
            let low = min_value(r).cloned().unwrap_or_else(crate::value::Value::zero);
            (0..sub.mdp.num_pairs()).map(|p| orig_pair(p).map_or_else(|| low.clone(), |o| r[o].clone())).collect()
        })
        .collect();
    // named rewards: the sink gets the worst value for the sign the query uses
    let mut named: Vec<RewardVector> = sub.mdp.rewards().to_vec();
    for rv in named.iter_mut() {
        let signs: BTreeSet<bool> = q.sources.iter().filter(|(n, _)| *n == rv.name).map(|(_, neg)| *neg).collect();
        if signs.len() == 1 && signs.contains(&true) {
            if let Some(orig) = mdp.reward(&rv.name) {
                if let Some(m) = max_value(&orig.values) {
                    rv.values[sink_pair] = m.clone();
                }
            }
        }
    }
    sub.mdp = sub.mdp.with_rewards(named)?;
    let query = MpQuery { rewards, ..q.clone() };
    Ok((sub, query))
}

/// Builds the subsystem induced by `support` (plus initial states) and
/// re-certifies `q` on it.
pub fn mp_subsystem(
    mdp: &Mdp,
    q: &MpQuery,
    support: &[usize],
    optimality: Optimality,
    solver: &dyn LpSolver,
    limits: &SolveLimits,
) -> Result<WitnessSubsystem> {
    let mut kept: BTreeSet<usize> = support.iter().copied().collect();
    kept.extend(mdp.initial().iter().map(|(s, _)| *s));
    let kept: Vec<usize> = kept.into_iter().collect();
    let (subsystem, sub_q) = restrict_mp(mdp, q, &kept)?;
    let c = certify_mp(&subsystem.mdp, &sub_q, solver, limits)?;
    if c.verdict != Verdict::Holds {
        return Err(Error::Numerical("the induced subsystem does not satisfy the query".into()));
    }
    if certify_mp(mdp, q, solver, limits)?.verdict != Verdict::Holds {
        return Err(Error::Numerical("subsystem holds but the full model does not".into()));
    }
    Ok(WitnessSubsystem {
        level: Level::Original,
        kept,
        subsystem,
        witnessed: Witnessed::Mp { query: sub_q, certificate: c.certificate },
        optimality,
        total_states: mdp.num_states(),
    })
}

fn require_milp_shape(t: QueryType, bounds: &[Bound]) -> Result<()> {
    if !matches!(t, QueryType::ExistsAnd | QueryType::ForallOr) {
        return Err(Error::UnsupportedQuery(format!(
            "minimal subsystems are computed for exists-and and forall-or queries, not {}",
            t.tag()
        )));
    }
    if !bounds.iter().all(|b| b.op.is_lower()) {
        return Err(Error::UnsupportedQuery("witnessing subsystems need lower bounds".into()));
    }
    Ok(())
}

fn weight(weights: Option<&[u64]>, s: usize) -> f64 {
    weights.map_or(1.0, |w| w[s] as f64)
}

/// Solves the MILP and returns the states whose selection variable is set.
fn run_milp(
    sys: &LinSystem<f64>,
    gammas: &[(usize, VarId)],
    start: Vec<f64>,
    solver: &dyn LpSolver,
    limits: &SolveLimits,
) -> Result<(Vec<usize>, Optimality)> {
    let out = solve_with_start(solver, sys, limits, Some(&start))?;
    let optimality = match &out.status {
        SolveStatus::Optimal => Optimality::Proven,
        SolveStatus::Feasible => Optimality::Incumbent { gap: out.gap.unwrap_or(f64::INFINITY) },
        SolveStatus::Infeasible => {
            return Err(Error::Numerical("support MILP is infeasible although a certificate exists".into()))
        }
        SolveStatus::Unbounded => return Err(Error::SolverUnknown("support MILP reported unbounded".into())),
        SolveStatus::Unknown(r) => return Err(Error::SolverUnknown(r.clone())),
    };
    let values = out.values.ok_or_else(|| Error::SolverUnknown("no incumbent".into()))?;
    Ok((gammas.iter().filter(|(_, g)| values[g.0] > 0.5).map(|(s, _)| *s).collect(), optimality))
}

/// A minimal witnessing subsystem for a lower-bounded (∃,∧) or (∀,∨)
/// reachability query. `weights` are per state of `rf.mdp()` (default 1);
/// objective targets and initial states are always kept.
pub fn milp_min_subsystem(
    rf: &ReachForm,
    q: &ReachQuery,
    weights: Option<&[u64]>,
    solver: &dyn LpSolver,
    limits: &SolveLimits,
) -> Result<WitnessSubsystem> {
    let t = QueryType::of(q.quantifier, q.connective);
    require_milp_shape(t, &q.bounds)?;
    let plain = find_certificate(rf, q, solver, limits)?.ok_or(Error::NotSatisfied)?;
    let plain_support = reach_state_support(rf, &plain);
    let mdp = rf.mdp();
    let initial: BTreeSet<usize> = mdp.initial().iter().map(|(s, _)| *s).collect();
    let mats = build_reach_matrices::<f64>(rf)?;
    let mut sys = LinSystem::new();
    let mut start: Vec<f64>;
    let mut gammas = Vec::new();
    let mut limits = limits.clone();
    let mut optimality_cap = None;
    match t {
        QueryType::ExistsAnd => {
            let items: Vec<(usize, &Bound)> =
                q.bounds.iter().enumerate().filter(|(_, b)| !(b.op == CmpOp::Ge && b.value.is_zero())).collect();
            let y = add_exists_rows(&mut sys, rf, &mats, &items, true)?;
            let ReachCertificate::ExistsAnd { y: y0 } = &plain else { unreachable!() };
            start = y0.clone();
            for &s in rf.columns() {
                if initial.contains(&s) {
                    continue;
                }
                let g = sys.add_binary(format!("keep[{}]", mdp.state_name(s)));
                for p in mdp.pairs(s) {
                    sys.add_indicator(g, y[rf.row_of(p).unwrap()]);
                }
                gammas.push((s, g));
                start.push(if plain_support.contains(&s) { 1.0 } else { 0.0 });
            }
            if indicator_big_m(solver, &sys, &limits)?.is_none() {
                let scale: f64 = y0.iter().sum::<f64>().max(1.0);
                limits.big_m_fallback = Some(10.0 * scale);
                optimality_cap = Some(Optimality::Heuristic);
            }
        }
        QueryType::ForallOr => {
            let op = q.bounds[0].op;
            let (x, _z) = add_forall_or_rows(&mut sys, rf, &mats, &q.bounds, op)?;
            let ReachCertificate::ForallOr { x: x0, z: z0 } = &plain else { unreachable!() };
            start = x0.iter().chain(z0).copied().collect();
            let big_m = q.bounds.len() as f64;
            for (c, &s) in rf.columns().iter().enumerate() {
                if initial.contains(&s) {
                    continue;
                }
                let g = sys.add_binary(format!("keep[{}]", mdp.state_name(s)));
                sys.add_constraint(format!("link[{}]", mdp.state_name(s)), vec![(x[c], 1.0), (g, -big_m)], Relation::Le, 0.0);
                gammas.push((s, g));
                start.push(if plain_support.contains(&s) { 1.0 } else { 0.0 });
            }
        }
        _ => unreachable!(),
    }
    sys.set_objective(Sense::Minimize, gammas.iter().map(|&(s, g)| (g, weight(weights, s))).collect());
    let (chosen, optimality) = run_milp(&sys, &gammas, start, solver, &limits)?;
    let optimality = optimality_cap.unwrap_or(optimality);
    match reach_subsystem(rf, q, &chosen, optimality, solver, &limits) {
        Ok(w) => Ok(w),
        Err(Error::Numerical(_)) | Err(Error::SolverUnknown(_)) => {
            reach_subsystem(rf, q, &plain_support, Optimality::Heuristic, solver, &limits)
        }
        Err(e) => Err(e),
    }
}

/// A minimal witnessing subsystem for a lower-bounded (∃,∧) or (∀,∨)
/// mean-payoff query.
pub fn milp_min_subsystem_mp(
    mdp: &Mdp,
    q: &MpQuery,
    weights: Option<&[u64]>,
    solver: &dyn LpSolver,
    limits: &SolveLimits,
) -> Result<WitnessSubsystem> {
    let t = q.query_type();
    require_milp_shape(t, &q.bounds)?;
    let plain = find_mp_certificate(mdp, q, solver, limits)?.ok_or(Error::NotSatisfied)?;
    let plain_support = mp_state_support(mdp, q, &plain);
    let initial: BTreeSet<usize> = mdp.initial().iter().map(|(s, _)| *s).collect();
    let mut sys = LinSystem::new();
    let mut start: Vec<f64>;
    let mut gammas = Vec::new();
    let mut limits = limits.clone();
    let mut optimality_cap = None;
    match t {
        QueryType::ExistsAnd => {
            let v = add_hmp_rows(&mut sys, mdp, &q.rewards, &q.bounds)?;
            let MpCertificate::ExistsAnd(f) = &plain else { unreachable!() };
            start = f.x.iter().chain(&f.y).chain(&f.z).copied().collect();
            for s in 0..mdp.num_states() {
                if initial.contains(&s) {
                    continue;
                }
                let g = sys.add_binary(format!("keep[{}]", mdp.state_name(s)));
                for p in mdp.pairs(s) {
                    sys.add_indicator(g, v.x[p]);
                    sys.add_indicator(g, v.y[p]);
                }
                gammas.push((s, g));
                start.push(if plain_support.contains(&s) { 1.0 } else { 0.0 });
            }
            if indicator_big_m(solver, &sys, &limits)?.is_none() {
                let scale: f64 = f.y.iter().sum::<f64>().max(1.0);
                limits.big_m_fallback = Some(10.0 * scale);
                optimality_cap = Some(Optimality::Heuristic);
            }
        }
        QueryType::ForallOr => {
            let v = add_fmp_rows(&mut sys, mdp, &q.rewards, &q.bounds)?;
            let MpCertificate::ForallOr(c) = &plain else { unreachable!() };
            start = c.g.iter().chain(&c.b).chain(&c.z).copied().collect();
            let rmin = build_r_min(&q.rewards);
            let range = q
                .rewards
                .iter()
                .zip(&rmin)
                .map(|(r, m)| max_value(r).map_or(0.0, |x| x.approx()) - m.approx())
                .fold(0.0, f64::max);
            let big_m = range * (1.0 + 1e-6) + 1e-6;
            for s in 0..mdp.num_states() {
                if initial.contains(&s) {
                    continue;
                }
                let g = sys.add_binary(format!("keep[{}]", mdp.state_name(s)));
                let mut terms = vec![(v.g[s], 1.0), (g, -big_m)];
                for (i, zi) in v.z.iter().enumerate() {
                    terms.push((*zi, -rmin[i].approx()));
                }
                sys.add_constraint(format!("link[{}]", mdp.state_name(s)), terms, Relation::Le, 0.0);
                gammas.push((s, g));
                start.push(if plain_support.contains(&s) { 1.0 } else { 0.0 });
            }
        }
        _ => unreachable!(),
    }
    sys.set_objective(Sense::Minimize, gammas.iter().map(|&(s, g)| (g, weight(weights, s))).collect());
    let (chosen, optimality) = run_milp(&sys, &gammas, start, solver, &limits)?;
    let optimality = optimality_cap.unwrap_or(optimality);
    match mp_subsystem(mdp, q, &chosen, optimality, solver, &limits) {
        Ok(w) => Ok(w),
        Err(Error::Numerical(_)) | Err(Error::SolverUnknown(_)) => {
            mp_subsystem(mdp, q, &plain_support, Optimality::Heuristic, solver, &limits)
        }
        Err(e) => Err(e),
    }
}

/// Quotient weights that count original states: a collapsed MEC weighs the
/// number of distinct original states among its product states, sinks weigh
/// nothing, everything else weighs one.
pub fn quotient_weights(reduced: &ReducedQuery) -> Vec<u64> {
    let quotient = &reduced.quotient;
    let mut w = vec![1u64; quotient.mdp.num_states()];
    for (c, mec) in quotient.mecs.iter().enumerate() {
        let bases: BTreeSet<usize> = mec.states.iter().map(|&s| reduced.product.states[s].base).collect();
        w[quotient.mec_state[c]] = bases.len() as u64;
        w[quotient.bot_state[c]] = 0;
    }
    w
}

/// States of the original model whose product copies map into `kept`.
pub fn original_states(reduced: &ReducedQuery, kept: &[usize]) -> Vec<usize> {
    let keep: BTreeSet<usize> = kept.iter().copied().collect();
    let mut out = BTreeSet::new();
    for (ps, st) in reduced.product.states.iter().enumerate() {
        if keep.contains(&reduced.quotient.iota[ps]) {
            out.insert(st.base);
        }
    }
    out.into_iter().collect()
}

/// Carries a quotient-level witness back to `original` and re-certifies the
/// query on the reduced form of the resulting subsystem.
pub fn transfer_subsystem(
    original: &Mdp,
    reduced: &ReducedQuery,
    ws: &WitnessSubsystem,
    opts: &ProductOptions,
    solver: &dyn LpSolver,
    limits: &SolveLimits,
) -> Result<WitnessSubsystem> {
    if ws.level != Level::Quotient {
        return Err(Error::ShapeMismatch("transfer expects a quotient-level witness".into()));
    }
    let kept = original_states(reduced, &ws.kept);
    let subsystem = induced_subsystem(original, &kept)?;
    let sub_red = reduce_query_on_subsystem(original, &subsystem, &reduced.source, opts)?;
    let c = certify(&sub_red.reach_form, &sub_red.query, solver, limits)?;
    if c.verdict != Verdict::Holds {
        return Err(Error::Numerical("the transferred subsystem does not satisfy the query".into()));
    }
    Ok(WitnessSubsystem {
        level: Level::Original,
        kept,
        subsystem,
        witnessed: Witnessed::Reach {
            reach_form: sub_red.reach_form,
            query: sub_red.query,
            certificate: c.certificate,
        },
        optimality: Optimality::Heuristic,
        total_states: original.num_states(),
    })
}
