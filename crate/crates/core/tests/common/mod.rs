//! Independent oracles and random instance generators shared by the
//! integration tests. Nothing here calls into the solver-backed parts of the
//! library; models are read through the plain `Mdp` accessors only.

#![allow(dead_code)]

use farkas::model::{Mdp, MdpBuilder, ReachForm};
use farkas::query::{CmpOp, Connective, Quantifier, ReachQuery};
use farkas::reach_cert::ReachCertificate;
use farkas::value::Value;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// A model as plain nested vectors: `actions[s][a]` is a list of `(succ, p)`.
#[derive(Clone, Debug)]
pub struct Plain {
    pub actions: Vec<Vec<Vec<(usize, f64)>>>,
    pub initial: Vec<f64>,
}

impl Plain {
    pub fn of(mdp: &Mdp) -> Plain {
        let actions = (0..mdp.num_states())
            .map(|s| mdp.pairs(s).map(|p| mdp.successors(p).collect()).collect())
            .collect();
        Plain { actions, initial: mdp.initial_f64() }
    }

    pub fn n(&self) -> usize {
        self.actions.len()
    }
}

// ---------------------------------------------------------------- linear algebra

/// Gaussian elimination with partial pivoting. `None` when singular.
pub fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Transitive closure (reflexive) of a successor relation.
pub fn closure(succ: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = succ.len();
    let mut r = vec![vec![false; n]; n];
    for s in 0..n {
        let mut stack = vec![s];
        r[s][s] = true;
        while let Some(u) = stack.pop() {
            for &v in &succ[u] {
                if !r[s][v] {
                    r[s][v] = true;
                    stack.push(v);
                }
            }
        }
    }
    r
}

// ---------------------------------------------------------------- end components

/// Maximal end components by repeated SCC refinement: `(states, actions)`
/// with `actions[i]` the kept action indices of `states[i]`.
pub fn mecs(m: &Plain) -> Vec<Vec<(usize, Vec<usize>)>> {
    let n = m.n();
    let mut alive = vec![true; n];
    let mut acts: Vec<Vec<usize>> = m.actions.iter().map(|a| (0..a.len()).collect()).collect();
    loop {
        let succ: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                if !alive[s] {
                    return vec![];
                }
                acts[s].iter().flat_map(|&a| m.actions[s][a].iter().map(|&(t, _)| t)).collect()
            })
            .collect();
        let r = closure(&succ);
        let same = |s: usize, t: usize| r[s][t] && r[t][s];
        let mut changed = false;
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            let before = acts[s].len();
            acts[s].retain(|&a| m.actions[s][a].iter().all(|&(t, _)| alive[t] && same(s, t)));
            changed |= acts[s].len() != before;
            if acts[s].is_empty() {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            let mut seen = vec![false; n];
            let mut out = Vec::new();
            for s in 0..n {
                if alive[s] && !seen[s] {
                    let comp: Vec<usize> = (0..n).filter(|&t| alive[t] && same(s, t)).collect();
                    for &t in &comp {
                        seen[t] = true;
                    }
                    out.push(comp.into_iter().map(|t| (t, acts[t].clone())).collect());
                }
            }
            return out;
        }
    }
}

/// No end component among the non-target states.
pub fn ec_free(m: &Plain, target: &[bool]) -> bool {
    let restricted = Plain {
        actions: (0..m.n())
            .map(|s| {
                if target[s] {
                    return vec![];
                }
                m.actions[s].iter().filter(|a| a.iter().all(|&(t, _)| !target[t])).cloned().collect()
            })
            .collect(),
        initial: m.initial.clone(),
    };
    mecs(&restricted).is_empty()
}

// ---------------------------------------------------------------- value iteration

/// Optimal expected terminal value: states with `fixed[s] = Some(v)` are
/// worth `v`, the others `opt_a Σ P x`, starting from zero.
pub fn value_iteration(m: &Plain, fixed: &[Option<f64>], maximize: bool) -> Vec<f64> {
    let n = m.n();
    let mut x: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    for _ in 0..1_000_000 {
        let mut delta: f64 = 0.0;
        for s in 0..n {
            if fixed[s].is_some() {
                continue;
            }
            let vals = m.actions[s].iter().map(|a| a.iter().map(|&(t, p)| p * x[t]).sum::<f64>());
            let v = if maximize { vals.fold(f64::NEG_INFINITY, f64::max) } else { vals.fold(f64::INFINITY, f64::min) };
            delta = delta.max((v - x[s]).abs());
            x[s] = v;
        }
        if delta < 1e-13 {
            break;
        }
    }
    x
}

fn initial_value(m: &Plain, x: &[f64]) -> f64 {
    m.initial.iter().zip(x).map(|(d, v)| d * v).sum()
}

/// `opt_σ Pr(◇G)` from the initial distribution.
pub fn reach_value(m: &Plain, goal: &[bool], maximize: bool) -> f64 {
    let fixed: Vec<Option<f64>> = goal.iter().map(|&g| g.then_some(1.0)).collect();
    initial_value(m, &value_iteration(m, &fixed, maximize))
}

/// `opt_σ Σ_i w_i Pr(◇G_i)` where the `G_i` consist of absorbing targets.
pub fn weighted_reach(m: &Plain, target: &[bool], goals: &[Vec<bool>], w: &[f64], maximize: bool) -> f64 {
    let fixed: Vec<Option<f64>> = (0..m.n())
        .map(|s| target[s].then(|| goals.iter().zip(w).filter(|(g, _)| g[s]).map(|(_, w)| w).sum()))
        .collect();
    initial_value(m, &value_iteration(m, &fixed, maximize))
}

/// Minimum of a convex function on `[0, 1]` by golden-section search.
fn convex_min(f: impl Fn(f64) -> f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    f(0.0).min(f(1.0)).min(fc).min(fd)
}

/// Signed distance of a two-objective query from its decision boundary on
/// an EC-free reachability-form model: positive when the query holds.
/// Values within the solver tolerance are inconclusive.
///
/// Conjunctive existential bounds hold iff every weighted sum separates, which
/// reduces the question to single-objective value iteration per weight.
pub fn reach_margin(m: &Plain, target: &[bool], goals: &[Vec<bool>], q: &ReachQuery) -> f64 {
    let lam: Vec<f64> = q.bounds.iter().map(|b| b.value.approx()).collect();
    let lower: Vec<bool> = q.bounds.iter().map(|b| b.op.is_lower()).collect();
    let single = |i: usize, maximize: bool| reach_value_on(m, target, &goals[i], maximize);
    let exists_and = |lam: &[f64], lower: bool| -> f64 {
        let k = goals.len();
        let w_of = |t: f64| if k == 1 { vec![1.0] } else { vec![t, 1.0 - t] };
        convex_min(|t| {
            let w = w_of(t);
            let wl: f64 = w.iter().zip(lam).map(|(a, b)| a * b).sum();
            if lower {
                weighted_reach(m, target, goals, &w, true) - wl
            } else {
                wl - weighted_reach(m, target, goals, &w, false)
            }
        })
    };
    match (q.quantifier, q.connective) {
        (Quantifier::Exists, Connective::And) => exists_and(&lam, lower[0]),
        // ∀σ ⋁ holds iff the opposite strict conjunction is unachievable
        (Quantifier::Forall, Connective::Or) => -exists_and(&lam, !lower[0]),
        (Quantifier::Exists, Connective::Or) => (0..lam.len())
            .map(|i| if lower[i] { single(i, true) - lam[i] } else { lam[i] - single(i, false) })
            .fold(f64::NEG_INFINITY, f64::max),
        (Quantifier::Forall, Connective::And) => (0..lam.len())
            .map(|i| if lower[i] { single(i, false) - lam[i] } else { lam[i] - single(i, true) })
            .fold(f64::INFINITY, f64::min),
    }
}

fn reach_value_on(m: &Plain, target: &[bool], goal: &[bool], maximize: bool) -> f64 {
    weighted_reach(m, target, &[goal.to_vec()], &[1.0], maximize)
}

// ---------------------------------------------------------------- mean payoff

/// Expected mean payoff of a memoryless deterministic policy.
pub fn policy_gain(m: &Plain, rewards: &[Vec<f64>], policy: &[usize]) -> f64 {
    let n = m.n();
    let row = |s: usize| &m.actions[s][policy[s]];
    let succ: Vec<Vec<usize>> = (0..n).map(|s| row(s).iter().map(|&(t, _)| t).collect()).collect();
    let r = closure(&succ);
    let bottom: Vec<bool> = (0..n).map(|s| (0..n).all(|t| !r[s][t] || r[t][s])).collect();
    // gain of each bottom state from the stationary distribution of its class
    let mut gain = vec![0.0; n];
    let mut done = vec![false; n];
    for s in 0..n {
        if !bottom[s] || done[s] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&t| r[s][t] && r[t][s]).collect();
        let idx = |t: usize| class.iter().position(|&c| c == t).unwrap();
        let k = class.len();
        // π (P - I) = 0 with the last equation replaced by Σπ = 1
        let mut a = vec![vec![0.0; k]; k];
        for (j, &u) in class.iter().enumerate() {
            a[j][j] -= 1.0;
            for &(t, p) in row(u) {
                a[idx(t)][j] += p;
            }
        }
        a[k - 1] = vec![1.0; k];
        let mut b = vec![0.0; k];
        b[k - 1] = 1.0;
        let pi = gauss(a, b).expect("stationary distribution");
        let g: f64 = class.iter().enumerate().map(|(j, &u)| pi[j] * rewards[u][policy[u]]).sum();
        for &u in &class {
            gain[u] = g;
            done[u] = true;
        }
    }
    // transient states: g = P g
    let trans: Vec<usize> = (0..n).filter(|&s| !bottom[s]).collect();
    if !trans.is_empty() {
        let idx = |t: usize| trans.iter().position(|&c| c == t);
        let k = trans.len();
        let mut a = vec![vec![0.0; k]; k];
        let mut b = vec![0.0; k];
        for (i, &s) in trans.iter().enumerate() {
            a[i][i] += 1.0;
            for &(t, p) in row(s) {
                match idx(t) {
                    Some(j) => a[i][j] -= p,
                    None => b[i] += p * gain[t],
                }
            }
        }
        let x = gauss(a, b).expect("transient system");
        for (i, &s) in trans.iter().enumerate() {
            gain[s] = x[i];
        }
    }
    initial_value(m, &gain)
}

/// Optimal expected mean payoff by enumerating memoryless deterministic
/// policies, which suffice for a single objective.
pub fn mp_value(m: &Plain, rewards: &[Vec<f64>], maximize: bool) -> f64 {
    let n = m.n();
    let mut policy = vec![0; n];
    let mut best = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    loop {
        let g = policy_gain(m, rewards, &policy);
        best = if maximize { best.max(g) } else { best.min(g) };
        let mut s = 0;
        loop {
            if s == n {
                return best;
            }
            policy[s] += 1;
            if policy[s] < m.actions[s].len() {
                break;
            }
            policy[s] = 0;
            s += 1;
        }
    }
}

// ---------------------------------------------------------------- exit rates

/// Absorption distribution of a chain that, in state `s`, stops with
/// probability `lambda[s]` and otherwise moves by `p`.
pub fn absorption(p: &[Vec<(usize, f64)>], delta: &[f64], lambda: &[f64]) -> Option<Vec<f64>> {
    // expected visits v solve v = δ + v (1-λ) P
    let n = p.len();
    let mut a = vec![vec![0.0; n]; n];
    for s in 0..n {
        a[s][s] += 1.0;
        for &(t, q) in &p[s] {
            a[t][s] -= (1.0 - lambda[s]) * q;
        }
    }
    let v = gauss(a, delta.to_vec())?;
    Some((0..n).map(|s| v[s] * lambda[s]).collect())
}

// ---------------------------------------------------------------- certificates

/// Dense evaluation of the defining inequalities of a reachability
/// certificate, built from the transition lists only.
pub fn check_reach_certificate(rf: &ReachForm, q: &ReachQuery, cert: &ReachCertificate<f64>, tol: f64) -> Result<(), String> {
    let mdp = rf.mdp();
    let n = mdp.num_states();
    let cols: Vec<usize> = (0..n).filter(|&s| !rf.is_target(s)).collect();
    let col = |s: usize| cols.iter().position(|&c| c == s);
    let rows: Vec<usize> = cols.iter().flat_map(|&s| mdp.pairs(s)).collect();
    let k = q.bounds.len();
    // A[r][c] and T[r][i]
    let mut a = vec![vec![0.0; cols.len()]; rows.len()];
    let mut t = vec![vec![0.0; k]; rows.len()];
    for (r, &p) in rows.iter().enumerate() {
        a[r][col(mdp.pair_state(p)).unwrap()] += 1.0;
        for (succ, pr) in mdp.successors(p) {
            match col(succ) {
                Some(c) => a[r][c] -= pr,
                None => {
                    for (i, ti) in t[r].iter_mut().enumerate() {
                        if rf.objective(i)[succ] {
                            *ti += pr;
                        }
                    }
                }
            }
        }
    }
    let init = mdp.initial_f64();
    let delta: Vec<f64> = cols.iter().map(|&s| init[s]).collect();
    let lam: Vec<f64> = q.bounds.iter().map(|b| b.value.approx()).collect();
    let holds = |op: CmpOp, lhs: f64, rhs: f64| match op {
        CmpOp::Ge => lhs >= rhs - tol,
        CmpOp::Le => lhs <= rhs + tol,
        CmpOp::Gt => lhs - rhs > -tol.min(1e-9),
        CmpOp::Lt => rhs - lhs > -tol.min(1e-9),
    };
    let fail = |what: String| Err(what);
    let exists_single = |y: &[f64], items: &[usize]| -> Result<(), String> {
        if y.len() != rows.len() || y.iter().any(|&v| v < -tol) {
            return fail("y is not a nonnegative row vector".into());
        }
        let lower = q.bounds[items[0]].op.is_lower();
        for c in 0..cols.len() {
            let v: f64 = (0..rows.len()).map(|r| a[r][c] * y[r]).sum();
            if lower && v > delta[c] + tol || !lower && v < delta[c] - tol {
                return fail(format!("flow row {c}: {v} vs {}", delta[c]));
            }
        }
        for &i in items {
            let v: f64 = (0..rows.len()).map(|r| t[r][i] * y[r]).sum();
            if !holds(q.bounds[i].op, v, lam[i]) {
                return fail(format!("objective {i}: {v} vs {}", lam[i]));
            }
        }
        Ok(())
    };
    let forall_single = |x: &[f64], i: usize| -> Result<(), String> {
        let lower = q.bounds[i].op.is_lower();
        for r in 0..rows.len() {
            let v: f64 = (0..cols.len()).map(|c| a[r][c] * x[c]).sum();
            if lower && v > t[r][i] + tol || !lower && v < t[r][i] - tol {
                return fail(format!("row {r}: {v} vs {}", t[r][i]));
            }
        }
        let v: f64 = (0..cols.len()).map(|c| delta[c] * x[c]).sum();
        if !holds(q.bounds[i].op, v, lam[i]) {
            return fail(format!("initial: {v} vs {}", lam[i]));
        }
        Ok(())
    };
    match cert {
        ReachCertificate::ExistsAnd { y } => {
            let items: Vec<usize> =
                (0..k).filter(|&i| !(q.bounds[i].op == CmpOp::Ge && lam[i] == 0.0)).collect();
            if items.is_empty() {
                return Ok(());
            }
            exists_single(y, &items)
        }
        ReachCertificate::ExistsOr { index, y } => {
            if q.bounds[*index].op == CmpOp::Ge && lam[*index] == 0.0 {
                return Ok(());
            }
            exists_single(y, &[*index])
        }
        ReachCertificate::ForallAnd { xs } => {
            for (i, x) in xs.iter().enumerate() {
                if q.bounds[i].op == CmpOp::Ge && lam[i] == 0.0 && x.iter().all(|&v| v == 0.0) {
                    continue;
                }
                forall_single(x, i)?;
            }
            Ok(())
        }
        ReachCertificate::ForallOr { x, z } => {
            let op = q.bounds[0].op;
            let lower = op.is_lower();
            if z.iter().any(|&v| v < -tol) || lower && x.iter().any(|&v| v < -tol) {
                return fail("sign constraint".into());
            }
            let zs: f64 = z.iter().sum();
            if op.is_strict() && zs > 1.0 + tol || !op.is_strict() && (zs - 1.0).abs() > tol {
                return fail(format!("Σz = {zs}"));
            }
            for r in 0..rows.len() {
                let v: f64 = (0..cols.len()).map(|c| a[r][c] * x[c]).sum();
                let rhs: f64 = (0..k).map(|i| t[r][i] * z[i]).sum();
                if lower && v > rhs + tol || !lower && v < rhs - tol {
                    return fail(format!("row {r}: {v} vs {rhs}"));
                }
            }
            let lhs: f64 = (0..cols.len()).map(|c| delta[c] * x[c]).sum();
            let rhs: f64 = (0..k).map(|i| lam[i] * z[i]).sum();
            if !holds(op, lhs, rhs) {
                return fail(format!("initial: {lhs} vs {rhs}"));
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------- generators

fn random_dist(rng: &mut TestRng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut d: Vec<f64> = w.iter().map(|v| v / s).collect();
    let head: f64 = d[..n - 1].iter().sum();
    d[n - 1] = 1.0 - head;
    d
}

fn random_successors(rng: &mut TestRng, pool: &[usize], max: usize) -> Vec<(usize, f64)> {
    let want = rng.gen_range(1..=max.min(pool.len()));
    let mut picked: Vec<usize> = Vec::new();
    while picked.len() < want {
        let s = pool[rng.gen_range(0..pool.len())];
        if !picked.contains(&s) {
            picked.push(s);
        }
    }
    picked.into_iter().zip(random_dist(rng, want)).collect()
}

/// A random instance in reachability form: states `s0..`, targets `g0`
/// (objective 0), `g1` (objective 1) and `f` (no objective).
pub struct RfInstance {
    pub rf: ReachForm,
    pub plain: Plain,
    pub target: Vec<bool>,
    pub goals: Vec<Vec<bool>>,
}

/// Random EC-free reachability-form MDP with at most `max_states` states and
/// at most `max_actions` actions per state, `k` objectives (1 or 2).
pub fn random_rf(rng: &mut TestRng, max_states: usize, max_actions: usize, k: usize) -> RfInstance {
    assert!(max_states >= 4 && (1..=2).contains(&k));
    loop {
        let inner = rng.gen_range(1..=max_states - 3);
        let n = inner + 3;
        let all: Vec<usize> = (0..n).collect();
        let mut actions: Vec<Vec<Vec<(usize, f64)>>> = Vec::new();
        for _ in 0..inner {
            let na = rng.gen_range(1..=max_actions);
            actions.push((0..na).map(|_| random_successors(rng, &all, 3)).collect());
        }
        for t in inner..n {
            actions.push(vec![vec![(t, 1.0)]]);
        }
        let mut target = vec![false; n];
        for t in inner..n {
            target[t] = true;
        }
        let mut initial = vec![0.0; n];
        initial[0] = 1.0;
        let plain = Plain { actions, initial };
        let reach = closure(&plain.actions.iter().map(|a| a.iter().flatten().map(|&(t, _)| t).collect()).collect::<Vec<_>>());
        if !(0..n).all(|s| (inner..n).any(|t| reach[s][t])) || !ec_free(&plain, &target) {
            continue;
        }
        let goals: Vec<Vec<bool>> = (0..k).map(|i| (0..n).map(|s| s == inner + i).collect()).collect();
        let names: Vec<String> = (0..n).map(|s| state_name(inner, s)).collect();
        let mdp = build(&plain, &names, &[]);
        let objectives: Vec<Vec<usize>> = (0..k).map(|i| vec![inner + i]).collect();
        let rf = ReachForm::new(mdp, &(inner..n).collect::<Vec<_>>(), &objectives).unwrap();
        return RfInstance { rf, plain, target, goals };
    }
}

/// Plain state names `s0, s1, ...`.
pub fn plain_names(n: usize) -> Vec<String> {
    (0..n).map(|s| format!("s{s}")).collect()
}

/// State names: `s<i>` below `inner`, then `g0`, `g1`, `f`.
pub fn state_name(inner: usize, s: usize) -> String {
    if s < inner {
        format!("s{s}")
    } else {
        ["g0", "g1", "f"][s - inner].to_string()
    }
}

/// Builds the library model; `rewards[r][s][a]` become reward vector `r<r>`.
pub fn build(plain: &Plain, names: &[String], rewards: &[Vec<Vec<f64>>]) -> Mdp {
    let mut b = MdpBuilder::new();
    for name in names {
        b.state(name);
    }
    for (s, acts) in plain.actions.iter().enumerate() {
        for (a, succ) in acts.iter().enumerate() {
            for &(t, p) in succ {
                b.transition(s, &format!("a{a}"), t, Value::from_f64(p));
            }
        }
    }
    for (s, &d) in plain.initial.iter().enumerate() {
        if d > 0.0 {
            b.initial_mass(s, Value::from_f64(d));
        }
    }
    for (r, vals) in rewards.iter().enumerate() {
        let rname = format!("r{r}");
        b.declare_reward(&rname);
        for (s, acts) in vals.iter().enumerate() {
            for (a, v) in acts.iter().enumerate() {
                b.reward(&rname, s, &format!("a{a}"), Value::from_f64(*v));
            }
        }
    }
    b.build().unwrap()
}

/// Random MDP without any structural promise; every state has an action.
/// Rewards are integers in `[-3, 3]`.
pub fn random_mdp(rng: &mut TestRng, max_states: usize, max_actions: usize, n_rewards: usize) -> (Plain, Vec<Vec<Vec<f64>>>) {
    let n = rng.gen_range(2..=max_states);
    let all: Vec<usize> = (0..n).collect();
    let actions: Vec<Vec<Vec<(usize, f64)>>> = (0..n)
        .map(|_| {
            let na = rng.gen_range(1..=max_actions);
            (0..na).map(|_| random_successors(rng, &all, 3)).collect()
        })
        .collect();
    let rewards = (0..n_rewards)
        .map(|_| actions.iter().map(|acts| acts.iter().map(|_| rng.gen_range(-3..=3) as f64).collect()).collect())
        .collect();
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    (Plain { actions, initial }, rewards)
}

/// Per-pair reward list in library pair order.
pub fn pair_rewards(rewards: &[Vec<f64>]) -> Vec<f64> {
    rewards.iter().flatten().copied().collect()
}

/// A random bound on the 0.05 grid.
pub fn grid_bound(rng: &mut TestRng) -> Value {
    Value::from_ratio(rng.gen_range(0..=20), 20)
}
