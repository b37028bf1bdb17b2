//! The explicit text format.
//!
//! ```text
//! # comment
//! @initial s0
//! s0 b s1 1/2
//! s0 b s3 0.5
//! @label safe s0 s1
//! @reward cost s0 b 3
//! ```

use std::collections::HashMap;
use std::fmt::Write;

use super::{Mdp, MdpBuilder};
use crate::error::{Error, Result};
use crate::value::Value;

pub fn parse_model(text: &str) -> Result<Mdp> {
    let mut b = MdpBuilder::new();
    let mut first_line: HashMap<(usize, String), usize> = HashMap::new();
    let mut sums: HashMap<(usize, String), Value> = HashMap::new();
    let mut saw_initial = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| Error::Parse { line, message };
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let number = |s: &str| Value::parse(s).map_err(|m| err(m));
        match tokens[0] {
            "@initial" => match tokens.len() {
                2 => {
                    let s = b.state(tokens[1]);
                    b.initial_mass(s, Value::one());
                    saw_initial = true;
                }
                3 => {
                    let s = b.state(tokens[1]);
                    b.initial_mass(s, number(tokens[2])?);
                    saw_initial = true;
                }
                _ => return Err(err("expected `@initial <state> [probability]`".into())),
            },
            "@reward" => {
                if tokens.len() != 5 {
                    return Err(err("expected `@reward <name> <state> <action> <value>`".into()));
                }
                let s = b.state(tokens[2]);
                b.reward(tokens[1], s, tokens[3], number(tokens[4])?);
            }
            "@label" => {
                if tokens.len() < 2 {
                    return Err(err("expected `@label <name> <state>...`".into()));
                }
                let states: Vec<usize> = tokens[2..].iter().map(|t| b.state(t)).collect();
                b.label(tokens[1], &states);
            }
            t if t.starts_with('@') => return Err(err(format!("unknown directive `{t}`"))),
            _ => {
                if tokens.len() != 4 {
                    return Err(err("expected `state action successor probability`".into()));
                }
                let p = number(tokens[3])?;
                if p.approx() < 0.0 || p.approx() > 1.0 {
                    return Err(err(format!("probability {p} outside [0,1]")));
                }
                let s = b.state(tokens[0]);
                let t = b.state(tokens[2]);
                let key = (s, tokens[1].to_string());
                first_line.entry(key.clone()).or_insert(line);
                let sum = sums.entry(key).or_insert_with(Value::zero);
                *sum = sum.add(&p);
                b.transition(s, tokens[1], t, p);
            }
        }
    }
    if !saw_initial {
        return Err(Error::Parse { line: 0, message: "missing `@initial` line".into() });
    }
    let mut bad: Vec<(usize, String)> = sums
        .iter()
        .filter(|(_, sum)| {
            if sum.is_exact() {
                **sum != Value::one()
            } else {
                (sum.approx() - 1.0).abs() > super::STOCHASTIC_TOL
            }
        })
        .map(|(key, sum)| (first_line[key], format!("distribution of action `{}` sums to {sum}", key.1)))
        .collect();
    bad.sort();
    if let Some((line, message)) = bad.into_iter().next() {
        return Err(Error::Parse { line, message });
    }
    b.build()
}

/// Canonical serialization: states, actions and successors sorted by name.
pub fn write_model(mdp: &Mdp) -> String {
    let mut out = String::new();
    let name = |s: usize| mdp.state_name(s);
    let mut init: Vec<(&str, &Value)> = mdp.initial().iter().map(|(s, v)| (name(*s), v)).collect();
    init.sort_by(|a, b| a.0.cmp(b.0));
    if let [(s, _)] = init.as_slice() {
        writeln!(out, "@initial {s}").unwrap();
    } else {
        for (s, v) in init {
            writeln!(out, "@initial {s} {v}").unwrap();
        }
    }
    let mut states: Vec<usize> = (0..mdp.num_states()).collect();
    states.sort_by(|&a, &b| name(a).cmp(name(b)));
    let sorted_pairs = |s: usize| {
        let mut ps: Vec<usize> = mdp.pairs(s).collect();
        ps.sort_by(|&a, &b| mdp.action(a).cmp(mdp.action(b)));
        ps
    };
    for &s in &states {
        for p in sorted_pairs(s) {
            let mut ts: Vec<usize> = mdp.transitions(p).collect();
            ts.sort_by(|&a, &b| name(mdp.target(a)).cmp(name(mdp.target(b))));
            for t in ts {
                writeln!(out, "{} {} {} {}", name(s), mdp.action(p), name(mdp.target(t)), mdp.prob(t))
                    .unwrap();
            }
        }
    }
    for (label, members) in mdp.labels() {
        let mut names: Vec<&str> = members.iter().map(|&s| name(s)).collect();
        names.sort();
        write!(out, "@label {label}").unwrap();
        for n in names {
            write!(out, " {n}").unwrap();
        }
        out.push('\n');
    }
    let mut rewards: Vec<_> = mdp.rewards().iter().collect();
    rewards.sort_by(|a, b| a.name.cmp(&b.name));
    for r in rewards {
        let mut wrote = false;
        for &s in &states {
            for p in sorted_pairs(s) {
                if !r.values[p].is_zero() {
                    writeln!(out, "@reward {} {} {} {}", r.name, name(s), mdp.action(p), r.values[p])
                        .unwrap();
                    wrote = true;
                }
            }
        }
        if !wrote {
            let p = mdp.pairs(states[0]).start;
            writeln!(out, "@reward {} {} {} 0", r.name, name(states[0]), mdp.action(p)).unwrap();
        }
    }
    out
}
