//! Scheduler witnesses.
//!
//! Memoryless schedulers read off flow certificates, the separating scheduler
//! of a `(∀,∨)` certificate, and the two-memory scheduler that transfers a
//! quotient scheduler back to the product.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};
use crate::graph::{Mec, Quotient};
use crate::lp::{self, LinSystem, LpSolver, Relation, Sense, SolveLimits, SolveStatus};
use crate::model::{Dtmc, Mdp, ReachForm};
use crate::query::{Connective, Quantifier, ReachQuery};

/// Tolerance for the internal absorption checks.
pub const EXIT_CHECK_TOL: f64 = 1e-10;

/// A distribution over the enabled actions of every state, stored per pair.
#[derive(Clone, Debug, PartialEq)]
pub struct MemorylessScheduler {
    pub probs: Vec<f64>,
}

impl MemorylessScheduler {
    pub fn new(mdp: &Mdp, probs: Vec<f64>) -> Result<MemorylessScheduler> {
        if probs.len() != mdp.num_pairs() {
            return Err(Error::ShapeMismatch("scheduler has wrong number of pairs".into()));
        }
        for s in 0..mdp.num_states() {
            let sum: f64 = mdp.pairs(s).map(|p| probs[p]).sum();
            if (sum - 1.0).abs() > 1e-9 || mdp.pairs(s).any(|p| probs[p] < 0.0) {
                return Err(Error::NotDistribution(format!("scheduler at {}", mdp.state_name(s))));
            }
        }
        Ok(MemorylessScheduler { probs })
    }

    /// Lowest-index action everywhere.
    pub fn dirac_lowest(mdp: &Mdp) -> MemorylessScheduler {
        let mut probs = vec![0.0; mdp.num_pairs()];
        for s in 0..mdp.num_states() {
            probs[mdp.pairs(s).start] = 1.0;
        }
        MemorylessScheduler { probs }
    }

    pub fn uniform(mdp: &Mdp) -> MemorylessScheduler {
        let mut probs = vec![0.0; mdp.num_pairs()];
        for s in 0..mdp.num_states() {
            let r = mdp.pairs(s);
            let w = 1.0 / r.len() as f64;
            for p in r {
                probs[p] = w;
            }
        }
        MemorylessScheduler { probs }
    }

    pub fn prob(&self, p: usize) -> f64 {
        self.probs[p]
    }

    /// The chain induced on the states of `mdp`.
    pub fn induced_chain(&self, mdp: &Mdp) -> Dtmc {
        let rows = (0..mdp.num_states())
            .map(|s| {
                let mut row = Vec::new();
                for p in mdp.pairs(s) {
                    if self.probs[p] > 0.0 {
                        for (t, pr) in mdp.successors(p) {
                            row.push((t, self.probs[p] * pr));
                        }
                    }
                }
                merge_row(row)
            })
            .collect();
        Dtmc { initial: mdp.initial_f64(), rows }
    }
}

fn merge_row(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (t, p) in row {
        match out.last_mut() {
            Some((u, q)) if *u == t => *q += p,
            _ => out.push((t, p)),
        }
    }
    out
}

/// `σ(s)(a) = y(s,a) / Σ y(s,·)`; Dirac on the lowest-index action where the
/// row has no mass. `y` is indexed by pair.
pub fn memoryless_from_flow(mdp: &Mdp, y: &[f64]) -> MemorylessScheduler {
    let mut probs = vec![0.0; mdp.num_pairs()];
    for s in 0..mdp.num_states() {
        let total: f64 = mdp.pairs(s).map(|p| y[p].max(0.0)).sum();
        if total > 0.0 {
            for p in mdp.pairs(s) {
                probs[p] = y[p].max(0.0) / total;
            }
        } else {
            probs[mdp.pairs(s).start] = 1.0;
        }
    }
    MemorylessScheduler { probs }
}

/// Spreads a vector over the rows of `rf` to all pairs of its model; target
/// pairs get 0.
pub fn flow_by_pair(rf: &ReachForm, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rf.mdp().num_pairs()];
    for (r, &p) in rf.rows().iter().enumerate() {
        out[p] = y[r];
    }
    out
}

/// Two memory locations: `m0` (leave) and `m1` (stay).
pub const MEMORY: usize = 2;

/// A scheduler with memory `{m0, m1}` and a stochastic memory update that
/// flips a coin whenever a MEC is entered by a non-internal pair.
#[derive(Clone, Debug, PartialEq)]
pub struct FmcScheduler {
    /// Per initial state: its mass and the initial memory distribution.
    pub initial: Vec<(usize, f64, [f64; MEMORY])>,
    /// `α_next` per memory location, stored per pair.
    pub next: [Vec<f64>; MEMORY],
    /// MEC of each state, with the probability `p_C` of entering `m0`.
    pub entry: Vec<Option<(usize, f64)>>,
    /// MEC an internal pair belongs to.
    pub internal: Vec<Option<usize>>,
}

impl FmcScheduler {
    /// `α_update` after taking pair `p` and arriving in `t` with memory `m`.
    pub fn update(&self, p: usize, t: usize, m: usize) -> [f64; MEMORY] {
        match self.entry[t] {
            Some((c, pc)) if self.internal[p] != Some(c) => [pc, 1.0 - pc],
            _ => {
                let mut d = [0.0; MEMORY];
                d[m] = 1.0;
                d
            }
        }
    }

    /// Builds the chain on `S × M`; state `(s, m)` has index `2s + m`.
    pub fn induced_chain(&self, mdp: &Mdp) -> Dtmc {
        let n = mdp.num_states();
        let mut initial = vec![0.0; n * MEMORY];
        for &(s, mass, d) in &self.initial {
            for m in 0..MEMORY {
                initial[s * MEMORY + m] += mass * d[m];
            }
        }
        let mut rows = Vec::with_capacity(n * MEMORY);
        for s in 0..n {
            for m in 0..MEMORY {
                let mut row = Vec::new();
                for p in mdp.pairs(s) {
                    let a = self.next[m][p];
                    if a <= 0.0 {
                        continue;
                    }
                    for (t, pr) in mdp.successors(p) {
                        let upd = self.update(p, t, m);
                        for (m2, &u) in upd.iter().enumerate() {
                            if u > 0.0 {
                                row.push((t * MEMORY + m2, a * pr * u));
                            }
                        }
                    }
                }
                rows.push(merge_row(row));
            }
        }
        Dtmc { initial, rows }
    }

    /// Graphviz text with one node per `(state, memory)`.
    pub fn to_dot(&self, mdp: &Mdp) -> String {
        let chain_states = |s: usize, m: usize| format!("\"{}/m{}\"", mdp.state_name(s), m);
        let mut out = String::from("digraph scheduler {\n");
        for &(s, mass, d) in &self.initial {
            for m in 0..MEMORY {
                if d[m] > 0.0 {
                    let _ = writeln!(out, "  {} [init={}];", chain_states(s, m), fmt_p(mass * d[m]));
                }
            }
        }
        for s in 0..mdp.num_states() {
            for m in 0..MEMORY {
                for p in mdp.pairs(s) {
                    let a = self.next[m][p];
                    if a <= 0.0 {
                        continue;
                    }
                    for (t, _) in mdp.successors(p) {
                        let upd = self.update(p, t, m);
                        for (m2, &u) in upd.iter().enumerate() {
                            if u <= 0.0 {
                                continue;
                            }
                            let mut label = format!("{}:{}", mdp.action(p), fmt_p(a));
                            if u < 1.0 || m2 != m {
                                let _ = write!(label, " mem m{}->m{}:{}", m, m2, fmt_p(u));
                            }
                            let _ = writeln!(
                                out,
                                "  {} -> {} [label=\"{}\"];",
                                chain_states(s, m),
                                chain_states(t, m2),
                                label
                            );
                        }
                    }
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

fn fmt_p(p: f64) -> String {
    let s = format!("{p:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "0".into() } else { s.to_string() }
}

/// Graphviz text for a memoryless scheduler.
pub fn memoryless_to_dot(mdp: &Mdp, sched: &MemorylessScheduler) -> String {
    let mut out = String::from("digraph scheduler {\n");
    for (s, v) in mdp.initial_f64().iter().enumerate() {
        if *v > 0.0 {
            let _ = writeln!(out, "  \"{}\" [init={}];", mdp.state_name(s), fmt_p(*v));
        }
    }
    for s in 0..mdp.num_states() {
        for p in mdp.pairs(s).filter(|&p| sched.probs[p] > 0.0) {
            for (t, _) in mdp.successors(p) {
                let _ = writeln!(
                    out,
                    "  \"{}\" -> \"{}\" [label=\"{}:{}\"];",
                    mdp.state_name(s),
                    mdp.state_name(t),
                    mdp.action(p),
                    fmt_p(sched.probs[p])
                );
            }
        }
    }
    out.push_str("}\n");
    out
}

pub enum SchedulerRef<'a> {
    Memoryless(&'a MemorylessScheduler),
    Fmc(&'a FmcScheduler),
}

/// Path properties understood by [`evaluate_scheduler`]. Sets are over states.
#[derive(Clone, Debug)]
pub enum PathProperty {
    /// `Pr(◇ G)`.
    Reach(Vec<bool>),
    /// `Pr(□ G)`.
    Invariant(Vec<bool>),
    /// `Pr(◇□ G)`.
    Persist(Vec<bool>),
    /// Expected long-run average of a pair reward.
    MeanPayoff(Vec<f64>),
}

/// Values of `props` under `sched`, memory unfolded.
pub fn evaluate_scheduler(mdp: &Mdp, sched: SchedulerRef<'_>, props: &[PathProperty]) -> Result<Vec<f64>> {
    let (chain, mem, state_reward): (Dtmc, usize, Box<dyn Fn(&[f64], usize) -> f64>) = match sched {
        SchedulerRef::Memoryless(s) => {
            let probs = s.probs.clone();
            let reward = move |r: &[f64], cs: usize| mdp.pairs(cs).map(|p| probs[p] * r[p]).sum();
            (s.induced_chain(mdp), 1, Box::new(reward))
        }
        SchedulerRef::Fmc(f) => {
            let next = f.next.clone();
            let reward = move |r: &[f64], cs: usize| {
                let (s, m) = (cs / MEMORY, cs % MEMORY);
                mdp.pairs(s).map(|p| next[m][p] * r[p]).sum()
            };
            (f.induced_chain(mdp), MEMORY, Box::new(reward))
        }
    };
    let lift = |set: &[bool]| -> Vec<bool> { (0..chain.num_states()).map(|cs| set[cs / mem]).collect() };
    let mut out = Vec::with_capacity(props.len());
    for prop in props {
        let v = match prop {
            PathProperty::Reach(g) => initial_value(&chain, &reach_values(&chain, &lift(g))?),
            PathProperty::Invariant(g) => {
                let bad: Vec<bool> = lift(g).iter().map(|b| !b).collect();
                1.0 - initial_value(&chain, &reach_values(&chain, &bad)?)
            }
            PathProperty::Persist(g) => {
                let g = lift(g);
                let mut inside = vec![false; chain.num_states()];
                for b in bsccs(&chain) {
                    if b.iter().all(|&s| g[s]) {
                        for s in b {
                            inside[s] = true;
                        }
                    }
                }
                initial_value(&chain, &reach_values(&chain, &inside)?)
            }
            PathProperty::MeanPayoff(r) => {
                let rew: Vec<f64> = (0..chain.num_states()).map(|cs| state_reward(r, cs)).collect();
                let mut total = 0.0;
                for b in bsccs(&chain) {
                    let pi = stationary(&chain, &b)?;
                    let gain: f64 = b.iter().zip(&pi).map(|(&s, w)| w * rew[s]).sum();
                    let mut set = vec![false; chain.num_states()];
                    for &s in &b {
                        set[s] = true;
                    }
                    total += gain * initial_value(&chain, &reach_values(&chain, &set)?);
                }
                total
            }
        };
        out.push(v);
    }
    Ok(out)
}

fn solve_dense(a: DMatrix<f64>, b: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    if b.is_empty() {
        return Ok(b);
    }
    a.lu().solve(&b).ok_or_else(|| Error::Numerical(format!("singular {what} system")))
}

fn initial_value(chain: &Dtmc, x: &[f64]) -> f64 {
    chain.initial.iter().zip(x).map(|(a, b)| a * b).sum()
}

fn chain_graph(chain: &Dtmc) -> DiGraph<(), ()> {
    let mut g = DiGraph::new();
    for _ in 0..chain.num_states() {
        g.add_node(());
    }
    for (s, row) in chain.rows.iter().enumerate() {
        for &(t, p) in row {
            if p > 0.0 {
                g.add_edge(NodeIndex::new(s), NodeIndex::new(t), ());
            }
        }
    }
    g
}

/// Bottom strongly connected components, each sorted.
pub fn bsccs(chain: &Dtmc) -> Vec<Vec<usize>> {
    let g = chain_graph(chain);
    let mut comp = vec![0; chain.num_states()];
    let sccs = tarjan_scc(&g);
    for (i, c) in sccs.iter().enumerate() {
        for n in c {
            comp[n.index()] = i;
        }
    }
    let mut out = Vec::new();
    for (i, c) in sccs.iter().enumerate() {
        let closed = c
            .iter()
            .all(|n| chain.rows[n.index()].iter().all(|&(t, p)| p <= 0.0 || comp[t] == i));
        if closed {
            let mut v: Vec<usize> = c.iter().map(|n| n.index()).collect();
            v.sort_unstable();
            out.push(v);
        }
    }
    out.sort();
    out
}

fn can_reach(chain: &Dtmc, target: &[bool]) -> Vec<bool> {
    let n = chain.num_states();
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, row) in chain.rows.iter().enumerate() {
        for &(t, p) in row {
            if p > 0.0 {
                pred[t].push(s);
            }
        }
    }
    let mut seen = target.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&s| target[s]).collect();
    while let Some(t) = stack.pop() {
        for &s in &pred[t] {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
    }
    seen
}

/// `Pr_s(◇ target)` for every state.
pub fn reach_values(chain: &Dtmc, target: &[bool]) -> Result<Vec<f64>> {
    let n = chain.num_states();
    let reach = can_reach(chain, target);
    let unknown: Vec<usize> = (0..n).filter(|&s| reach[s] && !target[s]).collect();
    let mut idx = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        idx[s] = i;
    }
    let m = unknown.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (i, &s) in unknown.iter().enumerate() {
        for &(t, p) in &chain.rows[s] {
            if target[t] {
                b[i] += p;
            } else if idx[t] != usize::MAX {
                a[(i, idx[t])] -= p;
            }
        }
    }
    let x = solve_dense(a, b, "absorption")?;
    let mut out: Vec<f64> = (0..n).map(|s| if target[s] { 1.0 } else { 0.0 }).collect();
    for (i, &s) in unknown.iter().enumerate() {
        out[s] = x[i];
    }
    Ok(out)
}

/// Stationary distribution of the closed class `states`.
fn stationary(chain: &Dtmc, states: &[usize]) -> Result<Vec<f64>> {
    let m = states.len();
    let pos = |t: usize| states.binary_search(&t).ok();
    // Column j of (I - P)^T holds the balance of state j.
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (i, &s) in states.iter().enumerate() {
        a[(i, i)] += 1.0;
        for &(t, p) in &chain.rows[s] {
            if let Some(j) = pos(t) {
                a[(j, i)] -= p;
            }
        }
    }
    let mut b = DVector::<f64>::zeros(m);
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    b[m - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or_else(|| Error::Numerical("singular stationary system".into()))?;
    Ok(x.iter().copied().collect())
}

/// Expected number of times each pair is played. With `transient_only`,
/// pairs of recurrent states get 0; otherwise a reachable recurrent state is
/// an error.
pub fn expected_frequencies(mdp: &Mdp, sched: &MemorylessScheduler, transient_only: bool) -> Result<Vec<f64>> {
    let chain = sched.induced_chain(mdp);
    let n = chain.num_states();
    let mut recurrent = vec![false; n];
    for b in bsccs(&chain) {
        for s in b {
            recurrent[s] = true;
        }
    }
    if !transient_only {
        let reached = reachable(&chain);
        if let Some(s) = (0..n).find(|&s| recurrent[s] && reached[s]) {
            return Err(Error::Divergent(mdp.state_name(s).to_string()));
        }
    }
    let visits = transient_visits(&chain, &recurrent)?;
    Ok((0..mdp.num_pairs()).map(|p| visits[mdp.pair_state(p)] * sched.probs[p]).collect())
}

fn reachable(chain: &Dtmc) -> Vec<bool> {
    let mut seen: Vec<bool> = chain.initial.iter().map(|&v| v > 0.0).collect();
    let mut stack: Vec<usize> = (0..chain.num_states()).filter(|&s| seen[s]).collect();
    while let Some(s) = stack.pop() {
        for &(t, p) in &chain.rows[s] {
            if p > 0.0 && !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    seen
}

/// Expected visits to non-excluded states: `v = δ + v P` on those states.
fn transient_visits(chain: &Dtmc, excluded: &[bool]) -> Result<Vec<f64>> {
    let n = chain.num_states();
    let live: Vec<usize> = (0..n).filter(|&s| !excluded[s]).collect();
    let mut idx = vec![usize::MAX; n];
    for (i, &s) in live.iter().enumerate() {
        idx[s] = i;
    }
    let m = live.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (i, &s) in live.iter().enumerate() {
        b[i] = chain.initial[s];
        for &(t, p) in &chain.rows[s] {
            if idx[t] != usize::MAX {
                a[(idx[t], i)] -= p;
            }
        }
    }
    let x = solve_dense(a, b, "visit")?;
    let mut out = vec![0.0; n];
    for (i, &s) in live.iter().enumerate() {
        out[s] = x[i];
    }
    Ok(out)
}

fn check_distribution(d: &[f64], what: &str) -> Result<()> {
    let sum: f64 = d.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || d.iter().any(|&v| v < -1e-12) {
        return Err(Error::NotDistribution(what.into()));
    }
    Ok(())
}

/// Exit rates `λ` such that the chain which leaves from `s` with probability
/// `λ(s)` and otherwise moves by `d`, started in `δ`, leaves from `s` with
/// probability `μ(s)`.
///
/// The visit vector solves `x (I - P) = δ - μ P`; among the solutions
/// (unique up to multiples of the steady state) we take the one with
/// `min (x - μ) = 1` over states with `μ > 0`, shifted further if needed to
/// keep `x ≥ 0` elsewhere.
pub fn solve_exit_rates(d: &Dtmc, delta: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    let n = d.num_states();
    if delta.len() != n || mu.len() != n {
        return Err(Error::NotDistribution("length differs from the chain".into()));
    }
    check_distribution(delta, "entry distribution")?;
    check_distribution(mu, "exit distribution")?;
    let classes = bsccs(d);
    if n == 0 || classes.len() != 1 || classes[0].len() != n {
        return Err(Error::NotStronglyConnected);
    }
    let states: Vec<usize> = (0..n).collect();
    let gamma = stationary(d, &states)?;

    // Particular solution with x(0) = 0.
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::from_column_slice(delta);
    for (s, row) in d.rows.iter().enumerate() {
        a[(s, s)] += 1.0;
        for &(t, p) in row {
            a[(t, s)] -= p;
            b[t] -= mu[s] * p;
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 0.0;
    }
    a[(n - 1, 0)] = 1.0;
    b[n - 1] = 0.0;
    let x0 = a.lu().solve(&b).ok_or_else(|| Error::Numerical("singular exit-rate system".into()))?;

    let mut r = f64::NEG_INFINITY;
    for s in 0..n {
        let need = if mu[s] > 0.0 { (1.0 - (x0[s] - mu[s])) / gamma[s] } else { -x0[s] / gamma[s] };
        r = r.max(need);
    }
    let x: Vec<f64> = (0..n).map(|s| x0[s] + r * gamma[s]).collect();
    let lambda: Vec<f64> = (0..n).map(|s| if mu[s] > 0.0 { (mu[s] / x[s]).clamp(0.0, 1.0) } else { 0.0 }).collect();

    let exits = exit_probabilities(d, delta, &lambda)?;
    for s in 0..n {
        if (exits[s] - mu[s]).abs() > EXIT_CHECK_TOL {
            return Err(Error::Numerical(format!(
                "exit probability at state {s} is {} instead of {}",
                exits[s], mu[s]
            )));
        }
    }
    Ok(lambda)
}

/// `Pr(leave from s)` in the chain that leaves from `s` with probability `λ(s)`.
pub fn exit_probabilities(d: &Dtmc, delta: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
    let n = d.num_states();
    let rows = d
        .rows
        .iter()
        .enumerate()
        .map(|(s, row)| row.iter().map(|&(t, p)| (t, (1.0 - lambda[s]) * p)).collect())
        .collect();
    let sub = Dtmc { initial: delta.to_vec(), rows };
    let visits = transient_visits(&sub, &vec![false; n])?;
    Ok((0..n).map(|s| visits[s] * lambda[s]).collect())
}

/// Uniform over the internal actions of `mec`; other states get their
/// lowest-index action.
pub fn stay_scheduler(mdp: &Mdp, mec: &Mec) -> MemorylessScheduler {
    let mut sched = MemorylessScheduler::dirac_lowest(mdp);
    for &s in &mec.states {
        let internal: Vec<usize> = mdp.pairs(s).filter(|&p| mec.contains_pair(p)).collect();
        for p in mdp.pairs(s) {
            sched.probs[p] = 0.0;
        }
        for &p in &internal {
            sched.probs[p] = 1.0 / internal.len() as f64;
        }
    }
    sched
}

/// The chain on `S(C)` that plays internal actions uniformly, with states in
/// the order of `mec.states`.
fn internal_chain(mdp: &Mdp, mec: &Mec) -> Dtmc {
    let stay = stay_scheduler(mdp, mec);
    let pos = |t: usize| mec.states.binary_search(&t).unwrap();
    let rows = mec
        .states
        .iter()
        .map(|&s| {
            let mut row = Vec::new();
            for p in mdp.pairs(s).filter(|&p| mec.contains_pair(p)) {
                for (t, pr) in mdp.successors(p) {
                    row.push((pos(t), stay.probs[p] * pr));
                }
            }
            merge_row(row)
        })
        .collect();
    Dtmc { initial: vec![0.0; mec.states.len()], rows }
}

/// Leaves MEC `c` of `quotient` with the exit-pair distribution that a
/// quotient scheduler uses at `s_C`. `freq` are its quotient pair frequencies.
pub fn leave_scheduler(
    mdp: &Mdp,
    quotient: &Quotient,
    c: usize,
    freq: &[f64],
) -> Result<MemorylessScheduler> {
    let mec = &quotient.mecs[c];
    let k = mec.states.len();
    let pos = |t: usize| mec.states.binary_search(&t).ok();

    // Entry mass Δ.
    let mut entry = vec![0.0; k];
    for (s, v) in mdp.initial_f64().iter().enumerate() {
        if let Some(i) = pos(s) {
            entry[i] += v;
        }
    }
    for p in 0..mdp.num_pairs() {
        if mec.contains_pair(p) {
            continue;
        }
        let Some(qp) = quotient.image[p] else { continue };
        if freq[qp] <= 0.0 {
            continue;
        }
        for (t, pr) in mdp.successors(p) {
            if let Some(i) = pos(t) {
                entry[i] += freq[qp] * pr;
            }
        }
    }
    let total: f64 = entry.iter().sum();
    if total <= 0.0 {
        return Err(Error::NoEntryMass(c));
    }
    let delta: Vec<f64> = entry.iter().map(|v| v / total).collect();

    // Exit distribution μ over exit pairs, and per state.
    let exits = mec.exit_pairs(mdp);
    let exit_freq: Vec<f64> = exits.iter().map(|&p| freq[quotient.image[p].unwrap()]).collect();
    let out_total: f64 = exit_freq.iter().sum();
    if out_total <= 0.0 {
        return Err(Error::NotDistribution(format!("no exit frequency at MEC {c}")));
    }
    let mut mu = vec![0.0; k];
    let mut state_freq = vec![0.0; k];
    for (&p, &f) in exits.iter().zip(&exit_freq) {
        let i = pos(mdp.pair_state(p)).unwrap();
        mu[i] += f / out_total;
        state_freq[i] += f;
    }

    let d = internal_chain(mdp, mec);
    let lambda = solve_exit_rates(&d, &delta, &mu)?;

    let stay = stay_scheduler(mdp, mec);
    let mut sched = stay.clone();
    for (i, &s) in mec.states.iter().enumerate() {
        for p in mdp.pairs(s) {
            sched.probs[p] = if mec.contains_pair(p) {
                (1.0 - lambda[i]) * stay.probs[p]
            } else if lambda[i] > 0.0 {
                lambda[i] * freq[quotient.image[p].unwrap()] / state_freq[i]
            } else {
                0.0
            };
        }
    }

    // Exit-pair distribution of the result, started in δ.
    let local = Dtmc {
        initial: delta.clone(),
        rows: mec
            .states
            .iter()
            .map(|&s| {
                let mut row = Vec::new();
                for p in mdp.pairs(s).filter(|&p| mec.contains_pair(p)) {
                    for (t, pr) in mdp.successors(p) {
                        row.push((pos(t).unwrap(), sched.probs[p] * pr));
                    }
                }
                merge_row(row)
            })
            .collect(),
    };
    let visits = transient_visits(&local, &vec![false; k])?;
    for (&p, &f) in exits.iter().zip(&exit_freq) {
        let got = visits[pos(mdp.pair_state(p)).unwrap()] * sched.probs[p];
        if (got - f / out_total).abs() > 1e-8 {
            return Err(Error::Numerical(format!("exit pair {} taken w.p. {got}", mdp.pair_name(p))));
        }
    }
    Ok(sched)
}

/// Transfers a memoryless quotient scheduler to the product.
///
/// Outside MECs the scheduler copies `sigma`. In a MEC it plays σ_leave in
/// `m0` and σ_stay in `m1`; entering a MEC by a pair that is not internal to
/// it moves to `m0` with the probability that `sigma` leaves `s_C`.
pub fn assemble_fmc_scheduler(mdp: &Mdp, quotient: &Quotient, sigma: &MemorylessScheduler) -> Result<FmcScheduler> {
    let q = &quotient.mdp;
    if sigma.probs.len() != q.num_pairs() {
        return Err(Error::ShapeMismatch("scheduler does not match the quotient".into()));
    }
    let freq = expected_frequencies(q, sigma, true)?;
    let mut next = [vec![0.0; mdp.num_pairs()], vec![0.0; mdp.num_pairs()]];
    for qp in 0..q.num_pairs() {
        if let Some(p) = quotient.origin[qp] {
            if quotient.mec_of_state[mdp.pair_state(p)].is_none() {
                next[0][p] = sigma.probs[qp];
                next[1][p] = sigma.probs[qp];
            }
        }
    }
    let mut entry = vec![None; mdp.num_states()];
    let mut internal = vec![None; mdp.num_pairs()];
    for (c, mec) in quotient.mecs.iter().enumerate() {
        let pc = (1.0 - sigma.probs[quotient.tau_pair[c]]).clamp(0.0, 1.0);
        let stay = stay_scheduler(mdp, mec);
        let leave = if pc > 0.0 {
            match leave_scheduler(mdp, quotient, c, &freq) {
                Ok(l) => l,
                Err(Error::NoEntryMass(_)) => stay.clone(),
                Err(e) => return Err(e),
            }
        } else {
            stay.clone()
        };
        for &s in &mec.states {
            entry[s] = Some((c, pc));
            for p in mdp.pairs(s) {
                next[0][p] = leave.probs[p];
                next[1][p] = stay.probs[p];
            }
        }
        for &p in &mec.pairs {
            internal[p] = Some(c);
        }
    }
    let initial = mdp
        .initial_f64()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(s, &v)| {
            let d = match entry[s] {
                Some((_, pc)) => [pc, 1.0 - pc],
                None => [1.0, 0.0],
            };
            (s, v, d)
        })
        .collect();
    Ok(FmcScheduler { initial, next, entry, internal })
}

/// The scheduler of a `(∀,∨)` certificate with weights `z`, and what it achieves.
#[derive(Clone, Debug)]
pub struct SeparatingScheduler {
    pub scheduler: MemorylessScheduler,
    /// Per-objective probabilities under `scheduler`.
    pub probabilities: Vec<f64>,
    /// `Σ z_i Pr(◇G_i)`.
    pub gamma: f64,
    /// `Σ z_i λ_i`.
    pub weighted_bound: f64,
}

/// Optimizes `Σ z_i Pr(◇G_i)` (maximizes for upper bounds, minimizes for
/// lower bounds) and checks that the optimum stays on the right side of
/// `Σ z_i λ_i`.
pub fn forall_or_witness(
    rf: &ReachForm,
    q: &ReachQuery,
    z: &[f64],
    solver: &dyn LpSolver,
    limits: &SolveLimits,
) -> Result<SeparatingScheduler> {
    if q.quantifier != Quantifier::Forall || (q.connective != Connective::Or && q.bounds.len() > 1) {
        return Err(Error::UnsupportedQuery("expected a (forall, or) query".into()));
    }
    if z.len() != q.bounds.len() {
        return Err(Error::ShapeMismatch("weight vector has wrong length".into()));
    }
    let lower = q.bounds[0].op.is_lower();
    if q.bounds.iter().any(|b| b.op.is_lower() != lower) {
        return Err(Error::UnsupportedQuery("mixed bound directions".into()));
    }
    let mats = crate::model::build_reach_matrices::<f64>(rf)?;
    let mut sys = LinSystem::<f64>::new();
    let y: Vec<_> = (0..rf.rows().len()).map(|r| sys.add_nonneg(format!("y[{r}]"))).collect();
    let mut cols: Vec<Vec<(lp::VarId, f64)>> = vec![Vec::new(); rf.columns().len()];
    for (r, row) in mats.a.iter().enumerate() {
        for &(c, v) in row {
            cols[c].push((y[r], v));
        }
    }
    // Minimizing needs every unit of flow to be absorbed.
    let rel = if lower { Relation::Eq } else { Relation::Le };
    for (c, terms) in cols.into_iter().enumerate() {
        sys.add_constraint(format!("flow[{c}]"), terms, rel, mats.delta[c]);
    }
    let obj: Vec<_> = y
        .iter()
        .zip(&mats.t)
        .map(|(&v, t)| (v, t.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()))
        .collect();
    sys.set_objective(if lower { Sense::Minimize } else { Sense::Maximize }, obj);
    let out = lp::solve(solver, &sys, limits)?;
    let values = match (&out.status, out.values) {
        (SolveStatus::Optimal, Some(v)) => v,
        (s, _) => return Err(Error::SolverUnknown(format!("weighted reachability: {s:?}"))),
    };
    let scheduler = memoryless_from_flow(rf.mdp(), &flow_by_pair(rf, &values));
    let props: Vec<PathProperty> =
        (0..rf.num_objectives()).map(|i| PathProperty::Reach(rf.objective(i).to_vec())).collect();
    let probabilities = evaluate_scheduler(rf.mdp(), SchedulerRef::Memoryless(&scheduler), &props)?;
    let gamma: f64 = probabilities.iter().zip(z).map(|(a, b)| a * b).sum();
    let weighted_bound: f64 = q.bounds.iter().zip(z).map(|(b, w)| b.value.approx() * w).sum();
    let ok = if lower { gamma >= weighted_bound - 1e-6 } else { gamma <= weighted_bound + 1e-6 };
    if !ok {
        return Err(Error::SeparationFailed(format!("optimum {gamma} against weighted bound {weighted_bound}")));
    }
    Ok(SeparatingScheduler { scheduler, probabilities, gamma, weighted_bound })
}
