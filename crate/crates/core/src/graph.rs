//! Maximal end components and the MEC quotient.

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::model::{Mdp, MdpBuilder, ReachForm};
use crate::value::Value;

/// An end component: a closed, strongly connected set of state-action pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mec {
    /// Sorted state indices.
    pub states: Vec<usize>,
    /// Sorted pair indices.
    pub pairs: Vec<usize>,
}

impl Mec {
    pub fn contains_state(&self, s: usize) -> bool {
        self.states.binary_search(&s).is_ok()
    }

    pub fn contains_pair(&self, p: usize) -> bool {
        self.pairs.binary_search(&p).is_ok()
    }

    /// Pairs of member states that are not internal.
    pub fn exit_pairs(&self, mdp: &Mdp) -> Vec<usize> {
        self.states.iter().flat_map(|&s| mdp.pairs(s)).filter(|&p| !self.contains_pair(p)).collect()
    }

    /// Smallest member state name, used for naming.
    pub fn min_name<'a>(&self, mdp: &'a Mdp) -> &'a str {
        self.states.iter().map(|&s| mdp.state_name(s)).min().unwrap()
    }

    /// Checks closedness and strong connectivity.
    pub fn verify(&self, mdp: &Mdp) -> Result<(), String> {
        if self.pairs.is_empty() {
            return Err("end component without pairs".into());
        }
        for &p in &self.pairs {
            if !self.contains_state(mdp.pair_state(p)) {
                return Err(format!("pair {} leaves the component", mdp.pair_name(p)));
            }
            for (t, _) in mdp.successors(p) {
                if !self.contains_state(t) {
                    return Err(format!("pair {} is not closed", mdp.pair_name(p)));
                }
            }
        }
        for &s in &self.states {
            if !mdp.pairs(s).any(|p| self.contains_pair(p)) {
                return Err(format!("state {} has no internal pair", mdp.state_name(s)));
            }
        }
        let sccs = sccs(mdp, &self.states, |p| self.contains_pair(p));
        if sccs.iter().filter(|c| !c.is_empty()).count() != 1 {
            return Err("end component is not strongly connected".into());
        }
        Ok(())
    }
}

/// Strongly connected components among `states`, using only allowed pairs.
fn sccs(mdp: &Mdp, states: &[usize], allowed: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
    let mut node = vec![None; mdp.num_states()];
    let mut g: DiGraph<usize, ()> = DiGraph::new();
    for &s in states {
        node[s] = Some(g.add_node(s));
    }
    for &s in states {
        for p in mdp.pairs(s).filter(|&p| allowed(p)) {
            for (t, _) in mdp.successors(p) {
                if let Some(nt) = node[t] {
                    g.add_edge(node[s].unwrap(), nt, ());
                }
            }
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|n: NodeIndex| g[n]).collect();
            v.sort_unstable();
            v
        })
        .collect()
}

/// Iterated SCC refinement: drop pairs that can leave their SCC until stable.
pub fn mec_decomposition(mdp: &Mdp) -> Vec<Mec> {
    let n = mdp.num_states();
    let mut allowed = vec![true; mdp.num_pairs()];
    loop {
        let alive: Vec<usize> = (0..n).filter(|&s| mdp.pairs(s).any(|p| allowed[p])).collect();
        let mut comp = vec![usize::MAX; n];
        for (i, c) in sccs(mdp, &alive, |p| allowed[p]).iter().enumerate() {
            for &s in c {
                comp[s] = i;
            }
        }
        let mut changed = false;
        for p in 0..mdp.num_pairs() {
            if !allowed[p] {
                continue;
            }
            let cs = comp[mdp.pair_state(p)];
            if mdp.successors(p).any(|(t, _)| comp[t] != cs) {
                allowed[p] = false;
                changed = true;
            }
        }
        if !changed {
            let mut mecs: Vec<Mec> = sccs(mdp, &alive, |p| allowed[p])
                .into_iter()
                .map(|states| {
                    let pairs = states.iter().flat_map(|&s| mdp.pairs(s)).filter(|&p| allowed[p]).collect();
                    Mec { states, pairs }
                })
                .filter(|m: &Mec| !m.pairs.is_empty())
                .collect();
            mecs.sort_by(|a, b| a.min_name(mdp).cmp(b.min_name(mdp)));
            for m in &mecs {
                if let Err(e) = m.verify(mdp) {
                    panic!("MEC self-check failed: {e}");
                }
            }
            return mecs;
        }
    }
}

/// The MEC quotient together with the bookkeeping needed to map back.
#[derive(Clone, Debug)]
pub struct Quotient {
    pub mdp: Mdp,
    pub mecs: Vec<Mec>,
    /// `ι`: original state to quotient state.
    pub iota: Vec<usize>,
    pub mec_of_state: Vec<Option<usize>>,
    /// `s_C` per MEC.
    pub mec_state: Vec<usize>,
    /// `⊥_C` per MEC.
    pub bot_state: Vec<usize>,
    /// The `τ` pair at `s_C` per MEC.
    pub tau_pair: Vec<usize>,
    /// Quotient pair to original pair (`None` for `τ` and the sink loops).
    pub origin: Vec<Option<usize>>,
    /// Original pair to quotient pair (`None` for MEC-internal pairs).
    pub image: Vec<Option<usize>>,
}

pub const TAU: &str = "tau";
pub const SINK_LOOP: &str = "loop";

/// Name of the quotient action standing for exit pair `(s, a)`.
pub fn exit_action(mdp: &Mdp, p: usize) -> String {
    format!("{}@{}", mdp.action(p), mdp.state_name(mdp.pair_state(p)))
}

pub fn mec_quotient(mdp: &Mdp) -> Quotient {
    let mecs = mec_decomposition(mdp);
    let n = mdp.num_states();
    let mut mec_of_state = vec![None; n];
    for (i, c) in mecs.iter().enumerate() {
        for &s in &c.states {
            mec_of_state[s] = Some(i);
        }
    }
    let mut b = MdpBuilder::new();
    let mut iota = vec![0; n];
    for s in 0..n {
        if mec_of_state[s].is_none() {
            iota[s] = b.state(mdp.state_name(s));
        }
    }
    let mut mec_state = Vec::new();
    let mut bot_state = Vec::new();
    for c in &mecs {
        let name = c.min_name(mdp);
        let sc = b.state(&format!("mec:{name}"));
        mec_state.push(sc);
        for &s in &c.states {
            iota[s] = sc;
        }
    }
    for c in &mecs {
        bot_state.push(b.state(&format!("bot:{}", c.min_name(mdp))));
    }
    // (quotient state, action name, original pair)
    let mut sources: Vec<(usize, String, usize)> = Vec::new();
    for s in 0..n {
        match mec_of_state[s] {
            None => {
                for p in mdp.pairs(s) {
                    sources.push((iota[s], mdp.action(p).to_string(), p));
                }
            }
            Some(i) => {
                for p in mdp.pairs(s).filter(|&p| !mecs[i].contains_pair(p)) {
                    sources.push((iota[s], exit_action(mdp, p), p));
                }
            }
        }
    }
    for (qs, a, p) in &sources {
        for t in mdp.transitions(*p) {
            b.transition(*qs, a, iota[mdp.target(t)], mdp.prob(t).clone());
        }
    }
    for i in 0..mecs.len() {
        b.transition(mec_state[i], TAU, bot_state[i], Value::one());
        b.transition(bot_state[i], SINK_LOOP, bot_state[i], Value::one());
    }
    for (s, v) in mdp.initial() {
        b.initial_mass(iota[*s], v.clone());
    }
    for r in mdp.rewards() {
        b.declare_reward(&r.name);
        for (qs, a, p) in &sources {
            if !r.values[*p].is_zero() {
                b.reward(&r.name, *qs, a, r.values[*p].clone());
            }
        }
    }
    for (name, states) in mdp.labels() {
        let kept: Vec<usize> = states.iter().filter(|&&s| mec_of_state[s].is_none()).map(|&s| iota[s]).collect();
        b.label(name, &kept);
    }
    let q = b.build().expect("quotient of a valid MDP is valid");

    let mut origin = vec![None; q.num_pairs()];
    let mut image = vec![None; mdp.num_pairs()];
    for (qs, a, p) in &sources {
        let qp = q.pair_of(*qs, a).unwrap();
        origin[qp] = Some(*p);
        image[*p] = Some(qp);
    }
    let tau_pair = mec_state.iter().map(|&sc| q.pair_of(sc, TAU).unwrap()).collect();
    let quotient = Quotient { mdp: q, mecs, iota, mec_of_state, mec_state, bot_state, tau_pair, origin, image };
    debug_assert!(quotient.is_ec_free_outside_sinks());
    quotient
}

impl Quotient {
    fn is_ec_free_outside_sinks(&self) -> bool {
        mec_decomposition(&self.mdp)
            .iter()
            .all(|c| c.states.iter().all(|s| self.bot_state.contains(s)))
    }

    pub fn is_sink(&self, qs: usize) -> bool {
        self.bot_state.contains(&qs)
    }
}

/// True iff every MEC consists of target states only.
pub fn is_ec_free(rf: &ReachForm) -> bool {
    mec_decomposition(rf.mdp()).iter().all(|c| c.states.iter().all(|&s| rf.is_target(s)))
}
