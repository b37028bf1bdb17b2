//! MDPs, DTMCs, induced subsystems and the reachability form.

mod format;

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::value::{Scalar, Value};

pub use format::{parse_model, write_model};

/// Tolerance on row sums when a model is not fully exact.
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct RewardVector {
    pub name: String,
    /// One entry per state-action pair.
    pub values: Vec<Value>,
}

/// A finite MDP with dense state and pair indices.
///
/// Pairs are grouped by state: the pairs of state `s` are `pairs(s)`.
/// Action labels are only meaningful together with their state.
#[derive(Clone, Debug)]
pub struct Mdp {
    state_names: Vec<String>,
    state_index: HashMap<String, usize>,
    pair_offsets: Vec<usize>,
    pair_state: Vec<usize>,
    actions: Vec<String>,
    trans_offsets: Vec<usize>,
    succ: Vec<usize>,
    probs: Vec<Value>,
    initial: Vec<(usize, Value)>,
    rewards: Vec<RewardVector>,
    labels: BTreeMap<String, Vec<usize>>,
}

impl Mdp {
    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.pair_state.len()
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.state_names[s]
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_index.get(name).copied()
    }

    pub fn pairs(&self, s: usize) -> Range<usize> {
        self.pair_offsets[s]..self.pair_offsets[s + 1]
    }

    pub fn pair_state(&self, p: usize) -> usize {
        self.pair_state[p]
    }

    pub fn action(&self, p: usize) -> &str {
        &self.actions[p]
    }

    pub fn pair_of(&self, s: usize, action: &str) -> Option<usize> {
        self.pairs(s).find(|&p| self.actions[p] == action)
    }

    /// `"<state> <action>"`, the key used in certificate files.
    pub fn pair_name(&self, p: usize) -> String {
        format!("{} {}", self.state_names[self.pair_state[p]], self.actions[p])
    }

    /// Indices into the transition arrays for pair `p`.
    pub fn transitions(&self, p: usize) -> Range<usize> {
        self.trans_offsets[p]..self.trans_offsets[p + 1]
    }

    pub fn target(&self, t: usize) -> usize {
        self.succ[t]
    }

    pub fn prob(&self, t: usize) -> &Value {
        &self.probs[t]
    }

    pub fn successors(&self, p: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.transitions(p).map(move |t| (self.succ[t], self.probs[t].approx()))
    }

    pub fn successors_as<N: Scalar>(&self, p: usize) -> Result<Vec<(usize, N)>> {
        self.transitions(p).map(|t| Ok((self.succ[t], N::from_value(&self.probs[t])?))).collect()
    }

    pub fn initial(&self) -> &[(usize, Value)] {
        &self.initial
    }

    pub fn initial_f64(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.num_states()];
        for (s, v) in &self.initial {
            d[*s] += v.approx();
        }
        d
    }

    /// The initial state when the initial distribution is Dirac.
    pub fn initial_state(&self) -> Option<usize> {
        match self.initial.as_slice() {
            [(s, _)] => Some(*s),
            _ => None,
        }
    }

    pub fn rewards(&self) -> &[RewardVector] {
        &self.rewards
    }

    pub fn reward(&self, name: &str) -> Option<&RewardVector> {
        self.rewards.iter().find(|r| r.name == name)
    }

    pub fn labels(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&[usize]> {
        self.labels.get(name).map(|v| v.as_slice())
    }

    /// True when every probability is known as an exact rational.
    pub fn is_exact(&self) -> bool {
        self.probs.iter().all(Value::is_exact)
    }

    pub fn is_dtmc(&self) -> bool {
        (0..self.num_states()).all(|s| self.pairs(s).len() == 1)
    }

    /// Same MDP with different reward vectors.
    pub fn with_rewards(&self, rewards: Vec<RewardVector>) -> Result<Mdp> {
        for r in &rewards {
            if r.values.len() != self.num_pairs() {
                return Err(Error::InvalidModel(format!("reward `{}` has wrong length", r.name)));
            }
        }
        let mut m = self.clone();
        m.rewards = rewards;
        Ok(m)
    }

    /// Same MDP with an added (or replaced) label.
    pub fn with_label(&self, name: &str, mut states: Vec<usize>) -> Mdp {
        states.sort_unstable();
        states.dedup();
        let mut m = self.clone();
        m.labels.insert(name.to_string(), states);
        m
    }

    /// States that can reach `targets` with positive probability under some scheduler.
    pub fn can_reach(&self, targets: &[bool]) -> Vec<bool> {
        let n = self.num_states();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for p in 0..self.num_pairs() {
            for (t, _) in self.successors(p) {
                preds[t].push(self.pair_state[p]);
            }
        }
        let mut seen = targets.to_vec();
        let mut stack: Vec<usize> = (0..n).filter(|&s| targets[s]).collect();
        while let Some(t) = stack.pop() {
            for &s in &preds[t] {
                if !seen[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        seen
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.pairs(s).all(|p| self.successors(p).all(|(t, _)| t == s))
    }
}

/// Incremental construction of an [`Mdp`].
#[derive(Clone, Debug, Default)]
pub struct MdpBuilder {
    names: Vec<String>,
    index: HashMap<String, usize>,
    pairs: Vec<(usize, String, Vec<(usize, Value)>)>,
    pair_index: HashMap<(usize, String), usize>,
    initial: Vec<(usize, Value)>,
    rewards: Vec<(String, usize, String, Value)>,
    reward_names: Vec<String>,
    labels: BTreeMap<String, Vec<usize>>,
}

impl MdpBuilder {
    pub fn new() -> MdpBuilder {
        MdpBuilder::default()
    }

    /// Returns the index of `name`, adding the state if needed.
    pub fn state(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    /// Adds `P(s, action, t) += p`. Zero probabilities are not stored.
    pub fn transition(&mut self, s: usize, action: &str, t: usize, p: Value) -> &mut Self {
        let key = (s, action.to_string());
        let idx = match self.pair_index.get(&key) {
            Some(&i) => i,
            None => {
                self.pairs.push((s, action.to_string(), Vec::new()));
                self.pair_index.insert(key, self.pairs.len() - 1);
                self.pairs.len() - 1
            }
        };
        if p.is_zero() {
            return self;
        }
        let dist = &mut self.pairs[idx].2;
        match dist.iter_mut().find(|(u, _)| *u == t) {
            Some((_, q)) => *q = q.add(&p),
            None => dist.push((t, p)),
        }
        self
    }

    /// Convenience: transition between named states.
    pub fn edge(&mut self, s: &str, action: &str, t: &str, p: Value) -> &mut Self {
        let s = self.state(s);
        let t = self.state(t);
        self.transition(s, action, t, p)
    }

    pub fn initial(&mut self, s: usize) -> &mut Self {
        self.initial = vec![(s, Value::one())];
        self
    }

    pub fn initial_mass(&mut self, s: usize, p: Value) -> &mut Self {
        self.initial.push((s, p));
        self
    }

    pub fn reward(&mut self, name: &str, s: usize, action: &str, v: Value) -> &mut Self {
        self.declare_reward(name);
        self.rewards.push((name.to_string(), s, action.to_string(), v));
        self
    }

    pub fn declare_reward(&mut self, name: &str) -> &mut Self {
        if !self.reward_names.iter().any(|n| n == name) {
            self.reward_names.push(name.to_string());
        }
        self
    }

    pub fn label(&mut self, name: &str, states: &[usize]) -> &mut Self {
        self.labels.entry(name.to_string()).or_default().extend_from_slice(states);
        self
    }

    pub fn build(self) -> Result<Mdp> {
        let n = self.names.len();
        let bad = |m: String| Err(Error::InvalidModel(m));
        if n == 0 {
            return bad("model has no states".into());
        }
        let mut order: Vec<usize> = (0..self.pairs.len()).collect();
        order.sort_by_key(|&i| self.pairs[i].0);
        let mut new_pos = vec![0; self.pairs.len()];
        for (pos, &i) in order.iter().enumerate() {
            new_pos[i] = pos;
        }

        let mut pair_offsets = vec![0; n + 1];
        let mut pair_state = Vec::with_capacity(order.len());
        let mut actions = Vec::with_capacity(order.len());
        let mut trans_offsets = vec![0];
        let mut succ = Vec::new();
        let mut probs = Vec::new();
        for &i in &order {
            let (s, a, dist) = &self.pairs[i];
            pair_offsets[s + 1] += 1;
            pair_state.push(*s);
            actions.push(a.clone());
            check_distribution(dist, || format!("{} {}", self.names[*s], a))?;
            let mut dist = dist.clone();
            dist.sort_by_key(|(t, _)| *t);
            for (t, p) in dist {
                succ.push(t);
                probs.push(p);
            }
            trans_offsets.push(succ.len());
        }
        for s in 0..n {
            if pair_offsets[s + 1] == 0 {
                return bad(format!("state {} has no enabled action", self.names[s]));
            }
            pair_offsets[s + 1] += pair_offsets[s];
        }

        let mut initial: Vec<(usize, Value)> = Vec::new();
        for (s, p) in self.initial {
            if p.is_zero() {
                continue;
            }
            match initial.iter_mut().find(|(u, _)| *u == s) {
                Some((_, q)) => *q = q.add(&p),
                None => initial.push((s, p)),
            }
        }
        if initial.is_empty() {
            return bad("no initial state".into());
        }
        initial.sort_by_key(|(s, _)| *s);
        check_distribution(&initial, || "initial distribution".to_string())?;

        let mut rewards: Vec<RewardVector> = self
            .reward_names
            .iter()
            .map(|name| RewardVector { name: name.clone(), values: vec![Value::zero(); order.len()] })
            .collect();
        for (name, s, a, v) in self.rewards {
            let Some(&i) = self.pair_index.get(&(s, a.clone())) else {
                return bad(format!("reward `{name}` on undefined pair {} {a}", self.names[s]));
            };
            let r = rewards.iter_mut().find(|r| r.name == name).unwrap();
            r.values[new_pos[i]] = v;
        }

        let mut labels = self.labels;
        for states in labels.values_mut() {
            states.sort_unstable();
            states.dedup();
        }

        Ok(Mdp {
            state_names: self.names,
            state_index: self.index,
            pair_offsets,
            pair_state,
            actions,
            trans_offsets,
            succ,
            probs,
            initial,
            rewards,
            labels,
        })
    }
}

fn check_distribution(dist: &[(usize, Value)], what: impl Fn() -> String) -> Result<()> {
    if dist.iter().any(|(_, p)| p.approx() < 0.0) {
        return Err(Error::InvalidModel(format!("{}: negative probability", what())));
    }
    if dist.iter().all(|(_, p)| p.is_exact()) {
        let sum = dist.iter().fold(Value::zero(), |acc, (_, p)| acc.add(p));
        if sum != Value::one() {
            return Err(Error::InvalidModel(format!("{}: probabilities sum to {sum}", what())));
        }
    } else {
        let sum: f64 = dist.iter().map(|(_, p)| p.approx()).sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidModel(format!("{}: probabilities sum to {sum}", what())));
        }
    }
    Ok(())
}

/// A Markov chain in floating point.
#[derive(Clone, Debug, PartialEq)]
pub struct Dtmc {
    pub initial: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl Dtmc {
    pub fn new(initial: Vec<f64>, rows: Vec<Vec<(usize, f64)>>) -> Result<Dtmc> {
        let n = rows.len();
        if initial.len() != n {
            return Err(Error::InvalidModel("initial distribution has wrong length".into()));
        }
        for (s, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL || row.iter().any(|&(t, p)| t >= n || p < 0.0) {
                return Err(Error::NotDistribution(format!("row {s}")));
            }
        }
        Ok(Dtmc { initial, rows })
    }

    pub fn from_mdp(mdp: &Mdp) -> Result<Dtmc> {
        if !mdp.is_dtmc() {
            return Err(Error::InvalidModel("more than one action in some state".into()));
        }
        let rows = (0..mdp.num_states())
            .map(|s| mdp.successors(mdp.pairs(s).start).collect())
            .collect();
        Dtmc::new(mdp.initial_f64(), rows)
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }
}

/// The subsystem induced by a set of kept states.
#[derive(Clone, Debug)]
pub struct Subsystem {
    pub mdp: Mdp,
    /// Original indices of the kept states, in increasing order.
    pub kept: Vec<usize>,
    /// Index of the sink in `mdp`.
    pub sink: usize,
    /// For each state of `mdp`, its original index (`None` for the sink).
    pub original_of: Vec<Option<usize>>,
    /// For each original state, its index in `mdp` if kept.
    pub new_of: Vec<Option<usize>>,
}

/// Builds the subsystem induced by `kept`: kept states keep their actions,
/// mass leaving the kept set goes to a fresh absorbing sink.
pub fn induced_subsystem(mdp: &Mdp, kept: &[usize]) -> Result<Subsystem> {
    let n = mdp.num_states();
    let mut keep = vec![false; n];
    for &s in kept {
        keep[s] = true;
    }
    for (s, _) in mdp.initial() {
        if !keep[*s] {
            return Err(Error::InitialStateDropped(mdp.state_name(*s).to_string()));
        }
    }
    let kept: Vec<usize> = (0..n).filter(|&s| keep[s]).collect();
    let mut b = MdpBuilder::new();
    let mut new_of = vec![None; n];
    for &s in &kept {
        new_of[s] = Some(b.state(mdp.state_name(s)));
    }
    let mut sink_name = "bot".to_string();
    let mut i = 0;
    while mdp.state_index(&sink_name).is_some() {
        i += 1;
        sink_name = format!("bot_{i}");
    }
    let sink = b.state(&sink_name);
    b.transition(sink, "loop", sink, Value::one());

    for &s in &kept {
        let ns = new_of[s].unwrap();
        for p in mdp.pairs(s) {
            let a = mdp.action(p);
            for t in mdp.transitions(p) {
                let target = new_of[mdp.target(t)].unwrap_or(sink);
                b.transition(ns, a, target, mdp.prob(t).clone());
            }
        }
    }
    for (s, v) in mdp.initial() {
        b.initial_mass(new_of[*s].unwrap(), v.clone());
    }
    for r in mdp.rewards() {
        b.declare_reward(&r.name);
        for &s in &kept {
            for p in mdp.pairs(s) {
                if !r.values[p].is_zero() {
                    b.reward(&r.name, new_of[s].unwrap(), mdp.action(p), r.values[p].clone());
                }
            }
        }
        if let Some(min) = min_value(&r.values) {
            b.reward(&r.name, sink, "loop", min.clone());
        }
    }
    for (name, states) in mdp.labels() {
        let mapped: Vec<usize> = states.iter().filter_map(|&s| new_of[s]).collect();
        b.label(name, &mapped);
    }
    let sub = b.build()?;
    let mut original_of: Vec<Option<usize>> = kept.iter().map(|&s| Some(s)).collect();
    original_of.push(None);
    Ok(Subsystem { mdp: sub, kept, sink, original_of, new_of })
}

/// Smallest entry, comparing exactly when both sides are exact.
pub fn min_value(values: &[Value]) -> Option<&Value> {
    values.iter().min_by(|a, b| match (a.exact(), b.exact()) {
        (Some(x), Some(y)) => x.cmp(y),
        _ => a.approx().total_cmp(&b.approx()),
    })
}

/// Largest entry, comparing exactly when both sides are exact.
pub fn max_value(values: &[Value]) -> Option<&Value> {
    values.iter().max_by(|a, b| match (a.exact(), b.exact()) {
        (Some(x), Some(y)) => x.cmp(y),
        _ => a.approx().total_cmp(&b.approx()),
    })
}

/// Violations of the reachability form.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReachFormReport {
    pub non_absorbing_targets: Vec<usize>,
    pub cannot_reach: Vec<usize>,
}

impl ReachFormReport {
    pub fn is_ok(&self) -> bool {
        self.non_absorbing_targets.is_empty() && self.cannot_reach.is_empty()
    }
}

pub fn check_reachability_form(mdp: &Mdp, targets: &[bool]) -> ReachFormReport {
    let non_absorbing_targets =
        (0..mdp.num_states()).filter(|&s| targets[s] && !mdp.is_absorbing(s)).collect();
    let reach = mdp.can_reach(targets);
    let cannot_reach = (0..mdp.num_states()).filter(|&s| !reach[s]).collect();
    ReachFormReport { non_absorbing_targets, cannot_reach }
}

/// An MDP in reachability form with objective target sets `G_i ⊆ F`.
///
/// Matrix rows are the pairs of non-target states and matrix columns the
/// non-target states, both in increasing index order.
#[derive(Clone, Debug)]
pub struct ReachForm {
    mdp: Mdp,
    is_target: Vec<bool>,
    objectives: Vec<Vec<bool>>,
    columns: Vec<usize>,
    column_of: Vec<Option<usize>>,
    rows: Vec<usize>,
    row_of: Vec<Option<usize>>,
}

impl ReachForm {
    pub fn new(mdp: Mdp, targets: &[usize], objectives: &[Vec<usize>]) -> Result<ReachForm> {
        let n = mdp.num_states();
        let mut is_target = vec![false; n];
        for &s in targets {
            is_target[s] = true;
        }
        let mut objs = Vec::with_capacity(objectives.len());
        for g in objectives {
            let mut v = vec![false; n];
            for &s in g {
                if !is_target[s] {
                    return Err(Error::InvalidModel(format!(
                        "objective state {} is not a target",
                        mdp.state_name(s)
                    )));
                }
                v[s] = true;
            }
            objs.push(v);
        }
        let report = check_reachability_form(&mdp, &is_target);
        if let Some(&s) = report.non_absorbing_targets.first() {
            return Err(Error::InvalidModel(format!("target {} is not absorbing", mdp.state_name(s))));
        }
        if let Some(&s) = report.cannot_reach.first() {
            return Err(Error::InvalidModel(format!(
                "state {} cannot reach the targets",
                mdp.state_name(s)
            )));
        }
        for (s, _) in mdp.initial() {
            if is_target[*s] {
                return Err(Error::InitialInTarget(mdp.state_name(*s).to_string()));
            }
        }
        let columns: Vec<usize> = (0..n).filter(|&s| !is_target[s]).collect();
        let mut column_of = vec![None; n];
        for (c, &s) in columns.iter().enumerate() {
            column_of[s] = Some(c);
        }
        let rows: Vec<usize> = columns.iter().flat_map(|&s| mdp.pairs(s)).collect();
        let mut row_of = vec![None; mdp.num_pairs()];
        for (r, &p) in rows.iter().enumerate() {
            row_of[p] = Some(r);
        }
        Ok(ReachForm { mdp, is_target, objectives: objs, columns, column_of, rows, row_of })
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn num_objectives(&self) -> usize {
        self.objectives.len()
    }

    pub fn is_target(&self, s: usize) -> bool {
        self.is_target[s]
    }

    pub fn targets(&self) -> Vec<usize> {
        (0..self.mdp.num_states()).filter(|&s| self.is_target[s]).collect()
    }

    /// Targets that belong to at least one objective.
    pub fn objective_targets(&self) -> Vec<usize> {
        (0..self.mdp.num_states()).filter(|&s| self.objectives.iter().any(|g| g[s])).collect()
    }

    pub fn objective(&self, i: usize) -> &[bool] {
        &self.objectives[i]
    }

    pub fn objective_states(&self, i: usize) -> Vec<usize> {
        (0..self.mdp.num_states()).filter(|&s| self.objectives[i][s]).collect()
    }

    /// Non-target states, i.e. the matrix columns.
    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn column_of(&self, s: usize) -> Option<usize> {
        self.column_of[s]
    }

    /// Pairs of non-target states, i.e. the matrix rows.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn row_of(&self, p: usize) -> Option<usize> {
        self.row_of[p]
    }

    /// Restricts to the subsystem induced by `kept`. Objective states are
    /// always kept; other targets only when listed. The sink becomes an extra
    /// target that belongs to no objective.
    pub fn restrict(&self, kept: &[usize]) -> Result<(ReachForm, Subsystem)> {
        let mut all: Vec<usize> = kept.to_vec();
        all.extend(self.objective_targets());
        let sub = induced_subsystem(&self.mdp, &all)?;
        let mut targets: Vec<usize> = self.targets().iter().filter_map(|&s| sub.new_of[s]).collect();
        targets.push(sub.sink);
        let objectives: Vec<Vec<usize>> = (0..self.num_objectives())
            .map(|i| self.objective_states(i).iter().map(|&s| sub.new_of[s].unwrap()).collect())
            .collect();
        let rf = ReachForm::new(sub.mdp.clone(), &targets, &objectives)?;
        Ok((rf, sub))
    }
}

/// The matrices `A`, `T` and the initial vector restricted to non-target states.
#[derive(Clone, Debug)]
pub struct ReachMatrices<N> {
    /// Sparse rows of `A`, indexed by matrix row, entries `(column, value)`.
    pub a: Vec<Vec<(usize, N)>>,
    /// Dense rows of `T`, indexed by matrix row.
    pub t: Vec<Vec<N>>,
    /// `δ_in` restricted to the columns.
    pub delta: Vec<N>,
}

pub fn build_reach_matrices<N: Scalar>(rf: &ReachForm) -> Result<ReachMatrices<N>> {
    let mdp = rf.mdp();
    let k = rf.num_objectives();
    let mut a = Vec::with_capacity(rf.rows().len());
    let mut t = Vec::with_capacity(rf.rows().len());
    for &p in rf.rows() {
        let s = mdp.pair_state(p);
        let mut row: Vec<(usize, N)> = vec![(rf.column_of(s).unwrap(), N::one())];
        let mut trow = vec![N::zero(); k];
        for (succ, prob) in mdp.successors_as::<N>(p)? {
            if let Some(c) = rf.column_of(succ) {
                match row.iter_mut().find(|(cc, _)| *cc == c) {
                    Some((_, v)) => *v = v.clone() - prob,
                    None => row.push((c, -prob)),
                }
            } else {
                for (i, ti) in trow.iter_mut().enumerate() {
                    if rf.objective(i)[succ] {
                        *ti = ti.clone() + prob.clone();
                    }
                }
            }
        }
        row.sort_by_key(|(c, _)| *c);
        a.push(row);
        t.push(trow);
    }
    let mut delta = vec![N::zero(); rf.columns().len()];
    for (s, v) in mdp.initial() {
        let c = rf.column_of(*s).expect("initial state is not a target");
        delta[c] = delta[c].clone() + N::from_value(v)?;
    }
    Ok(ReachMatrices { a, t, delta })
}
