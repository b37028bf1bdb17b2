//! Product with the visited-set tracker and reduction of reach/invariant
//! queries to reachability of quotient sinks.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::graph::{mec_quotient, Mec, Quotient};
use crate::model::{Mdp, MdpBuilder, ReachForm, Subsystem};
use crate::query::{normalize_lower_bounds, Bound, Family, LabelRef, PredicateKind, Query, ReachQuery};

/// When the tracked sets are updated along a transition `s → t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UpdateRule {
    /// Record the state that is entered; the initial state is recorded too.
    #[default]
    Target,
    /// Record the state that is left; the initial product state is `(s_in, ∅, ∅)`.
    Source,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ProductOptions {
    pub rule: UpdateRule,
    /// Maximum number of product states; `None` means `10·|S|·2^(k+ℓ)`.
    pub cap: Option<usize>,
}

/// `u`: reach indices already seen. `v`: invariant indices already violated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ProductState {
    pub base: usize,
    pub u: u64,
    pub v: u64,
}

#[derive(Clone, Debug)]
pub struct Product {
    pub mdp: Mdp,
    pub states: Vec<ProductState>,
    pub k: usize,
    pub l: usize,
}

fn bits(mask: u64, n: usize) -> String {
    (0..n).map(|i| if mask >> i & 1 == 1 { '1' } else { '0' }).collect()
}

fn seen(s: usize, reach: &[Vec<bool>], safe: &[Vec<bool>]) -> (u64, u64) {
    let mut u = 0;
    for (i, t) in reach.iter().enumerate() {
        if t[s] {
            u |= 1 << i;
        }
    }
    let mut v = 0;
    for (j, g) in safe.iter().enumerate() {
        if !g[s] {
            v |= 1 << j;
        }
    }
    (u, v)
}

/// Builds the reachable part of `mdp × tracker` by breadth-first search.
pub fn build_product(
    mdp: &Mdp,
    reach: &[Vec<bool>],
    safe: &[Vec<bool>],
    opts: &ProductOptions,
) -> Result<Product> {
    let (k, l) = (reach.len(), safe.len());
    if k + l > 62 {
        return Err(Error::UnsupportedQuery("at most 62 predicates are supported".into()));
    }
    let cap = opts
        .cap
        .unwrap_or_else(|| 10usize.saturating_mul(mdp.num_states()).saturating_mul(1usize << (k + l)));
    let mut index: HashMap<ProductState, usize> = HashMap::new();
    let mut states: Vec<ProductState> = Vec::new();
    let mut queue = VecDeque::new();
    let mut b = MdpBuilder::new();
    let name = |ps: &ProductState| format!("{}|{}|{}", mdp.state_name(ps.base), bits(ps.u, k), bits(ps.v, l));

    let mut intern = |ps: ProductState,
                      b: &mut MdpBuilder,
                      states: &mut Vec<ProductState>,
                      queue: &mut VecDeque<usize>|
     -> Result<usize> {
        if let Some(&i) = index.get(&ps) {
            return Ok(i);
        }
        if states.len() >= cap {
            return Err(Error::BlowupLimit { cap });
        }
        let i = b.state(&name(&ps));
        index.insert(ps, i);
        states.push(ps);
        queue.push_back(i);
        Ok(i)
    };

    for (s, p) in mdp.initial() {
        let (u, v) = match opts.rule {
            UpdateRule::Target => seen(*s, reach, safe),
            UpdateRule::Source => (0, 0),
        };
        let i = intern(ProductState { base: *s, u, v }, &mut b, &mut states, &mut queue)?;
        b.initial_mass(i, p.clone());
    }
    while let Some(i) = queue.pop_front() {
        let ps = states[i];
        for p in mdp.pairs(ps.base) {
            for t in mdp.transitions(p) {
                let succ = mdp.target(t);
                let (du, dv) = match opts.rule {
                    UpdateRule::Target => seen(succ, reach, safe),
                    UpdateRule::Source => seen(ps.base, reach, safe),
                };
                let next = ProductState { base: succ, u: ps.u | du, v: ps.v | dv };
                let j = intern(next, &mut b, &mut states, &mut queue)?;
                b.transition(i, mdp.action(p), j, mdp.prob(t).clone());
            }
        }
    }
    for r in mdp.rewards() {
        b.declare_reward(&r.name);
        for (i, ps) in states.iter().enumerate() {
            for p in mdp.pairs(ps.base) {
                if !r.values[p].is_zero() {
                    b.reward(&r.name, i, mdp.action(p), r.values[p].clone());
                }
            }
        }
    }
    for (label, members) in mdp.labels() {
        let lifted: Vec<usize> =
            (0..states.len()).filter(|&i| members.binary_search(&states[i].base).is_ok()).collect();
        b.label(label, &lifted);
    }
    Ok(Product { mdp: b.build()?, states, k, l })
}

/// `A_i`: MECs whose `u` contains `i`. `B_j`: MECs whose `v` does not contain `j`.
pub fn classify_mecs(product: &Product, mecs: &[Mec]) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
    let mut a = vec![Vec::new(); product.k];
    let mut b = vec![Vec::new(); product.l];
    for (c, mec) in mecs.iter().enumerate() {
        let first = product.states[mec.states[0]];
        if mec.states.iter().any(|&s| {
            let ps = product.states[s];
            ps.u != first.u || ps.v != first.v
        }) {
            return Err(Error::InconsistentMec(c));
        }
        for (i, ai) in a.iter_mut().enumerate() {
            if first.u >> i & 1 == 1 {
                ai.push(c);
            }
        }
        for (j, bj) in b.iter_mut().enumerate() {
            if first.v >> j & 1 == 0 {
                bj.push(c);
            }
        }
    }
    Ok((a, b))
}

/// A reach/invariant query on `N` rephrased as a lower-bounded reachability
/// query on the MEC quotient of the product.
#[derive(Clone, Debug)]
pub struct ReducedQuery {
    pub product: Product,
    pub quotient: Quotient,
    /// Quotient in reachability form; `F` is every sink, objective `i`
    /// belongs to predicate `i` of `source`.
    pub reach_form: ReachForm,
    pub query: ReachQuery,
    /// The normalized query on the original model.
    pub source: Query,
}

impl ReducedQuery {
    /// Objective `i` as indices into `quotient.mecs`.
    pub fn objective_mecs(&self, i: usize) -> Vec<usize> {
        (0..self.quotient.mecs.len())
            .filter(|&c| self.reach_form.objective(i)[self.quotient.bot_state[c]])
            .collect()
    }
}

pub fn reduce_query(mdp: &Mdp, q: &Query, opts: &ProductOptions) -> Result<ReducedQuery> {
    reduce_query_with(mdp, q, opts, &|l: &LabelRef| l.resolve(mdp))
}

/// Like [`reduce_query`] on `sub.mdp`, with labels resolved on `original`.
/// The sink belongs to no target set and to no safe set, so it can only lower
/// the probabilities of lower-bounded predicates.
pub fn reduce_query_on_subsystem(
    original: &Mdp,
    sub: &Subsystem,
    q: &Query,
    opts: &ProductOptions,
) -> Result<ReducedQuery> {
    let resolve = |l: &LabelRef| -> Result<Vec<bool>> {
        let full = l.resolve(original)?;
        Ok(sub.original_of.iter().map(|o| o.is_some_and(|s| full[s])).collect())
    };
    reduce_query_with(&sub.mdp, q, opts, &resolve)
}

fn reduce_query_with(
    mdp: &Mdp,
    q: &Query,
    opts: &ProductOptions,
    resolve: &dyn Fn(&LabelRef) -> Result<Vec<bool>>,
) -> Result<ReducedQuery> {
    if q.validate()? != Family::ReachInvariant {
        return Err(Error::UnsupportedQuery("expected a reach/invariant query".into()));
    }
    let source = normalize_lower_bounds(q);
    let mut reach = Vec::new();
    let mut safe = Vec::new();
    // (is_reach, index into reach or safe)
    let mut slots = Vec::new();
    for p in &source.predicates {
        match &p.kind {
            PredicateKind::Reach(l) => {
                slots.push((true, reach.len()));
                reach.push(resolve(l)?);
            }
            PredicateKind::Invariant(l) => {
                slots.push((false, safe.len()));
                safe.push(resolve(l)?);
            }
            PredicateKind::MeanPayoff { .. } => unreachable!(),
        }
    }
    let product = build_product(mdp, &reach, &safe, opts)?;
    let quotient = mec_quotient(&product.mdp);
    let (a, b) = classify_mecs(&product, &quotient.mecs)?;
    let objectives: Vec<Vec<usize>> = slots
        .iter()
        .map(|&(is_reach, i)| {
            let mecs = if is_reach { &a[i] } else { &b[i] };
            mecs.iter().map(|&c| quotient.bot_state[c]).collect()
        })
        .collect();
    let reach_form = ReachForm::new(quotient.mdp.clone(), &quotient.bot_state, &objectives)?;
    let query = ReachQuery {
        quantifier: source.quantifier,
        connective: source.connective,
        bounds: source.predicates.iter().map(|p| Bound { op: p.op, value: p.bound.clone() }).collect(),
    };
    Ok(ReducedQuery { product, quotient, reach_form, query, source })
}
