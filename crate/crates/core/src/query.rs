//! Multi-objective queries over labels and reward vectors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Mdp;
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Exists,
    Forall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Connective {
    And,
    Or,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    /// The operator of the negated comparison.
    pub fn complement(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    /// Mirror image: `a op b` iff `-a op.flip() -b`.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Gt)
    }

    pub fn is_lower(self) -> bool {
        matches!(self, CmpOp::Gt | CmpOp::Ge)
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn parse(s: &str) -> Option<CmpOp> {
        Some(match s {
            "<" => CmpOp::Lt,
            "<=" | "≤" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" | "≥" => CmpOp::Ge,
            _ => return None,
        })
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    Liminf,
    Limsup,
}

impl Flavor {
    pub fn dual(self) -> Flavor {
        match self {
            Flavor::Liminf => Flavor::Limsup,
            Flavor::Limsup => Flavor::Liminf,
        }
    }
}

/// A label, possibly complemented (`!name` in query files).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelRef {
    pub name: String,
    pub complement: bool,
}

impl LabelRef {
    pub fn new(name: &str) -> LabelRef {
        match name.strip_prefix('!') {
            Some(rest) => LabelRef { name: rest.to_string(), complement: true },
            None => LabelRef { name: name.to_string(), complement: false },
        }
    }

    pub fn negated(&self) -> LabelRef {
        LabelRef { name: self.name.clone(), complement: !self.complement }
    }

    /// Membership vector over the states of `mdp`.
    pub fn resolve(&self, mdp: &Mdp) -> Result<Vec<bool>> {
        let states = mdp
            .label(&self.name)
            .ok_or_else(|| Error::InvalidQuery(format!("unknown label `{}`", self.name)))?;
        let mut v = vec![self.complement; mdp.num_states()];
        for &s in states {
            v[s] = !self.complement;
        }
        Ok(v)
    }
}

impl fmt::Display for LabelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.complement {
            write!(f, "!{}", self.name)
        } else {
            f.write_str(&self.name)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PredicateKind {
    /// `Pr(◇ target)`.
    Reach(LabelRef),
    /// `Pr(□ safe)`.
    Invariant(LabelRef),
    /// `E[mp(r)]`, or `E[mp(-r)]` when `negated`.
    MeanPayoff { reward: String, flavor: Flavor, negated: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Predicate {
    pub kind: PredicateKind,
    pub op: CmpOp,
    pub bound: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    ReachInvariant,
    MeanPayoff,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub quantifier: Quantifier,
    pub connective: Connective,
    pub predicates: Vec<Predicate>,
}

impl Query {
    pub fn family(&self) -> Result<Family> {
        let mut fam = None;
        for p in &self.predicates {
            let f = match p.kind {
                PredicateKind::MeanPayoff { .. } => Family::MeanPayoff,
                _ => Family::ReachInvariant,
            };
            if fam.is_some_and(|g| g != f) {
                return Err(Error::InvalidQuery(
                    "reach/invariant and mean-payoff predicates cannot be mixed".into(),
                ));
            }
            fam = Some(f);
        }
        fam.ok_or_else(|| Error::InvalidQuery("query has no predicates".into()))
    }

    /// Checks the family and the bound ranges.
    pub fn validate(&self) -> Result<Family> {
        let fam = self.family()?;
        for p in &self.predicates {
            let b = p.bound.approx();
            if !b.is_finite() {
                return Err(Error::InvalidQuery(format!("bound {} is not finite", p.bound)));
            }
            if fam == Family::ReachInvariant && !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidQuery(format!("probability bound {} outside [0,1]", p.bound)));
            }
        }
        Ok(fam)
    }

    pub fn is_lower_bounded(&self) -> bool {
        self.predicates.iter().all(|p| p.op.is_lower())
    }

    pub fn from_json(text: &str) -> Result<Query> {
        let raw: QueryJson =
            serde_json::from_str(text).map_err(|e| Error::InvalidQuery(e.to_string()))?;
        raw.into_query()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&QueryJson::from_query(self)).unwrap()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(QueryJson::from_query(self)).unwrap()
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Query> {
        let raw: QueryJson =
            serde_json::from_value(v.clone()).map_err(|e| Error::InvalidQuery(e.to_string()))?;
        raw.into_query()
    }
}

/// Rewrites every predicate to a lower bound (`>` or `≥`).
///
/// `Pr(◇G) ≤ λ` becomes `Pr(□¬G) ≥ 1-λ` and vice versa; mean-payoff
/// predicates switch to the negated reward with the dual flavor and bound `-λ`.
pub fn normalize_lower_bounds(q: &Query) -> Query {
    let predicates = q
        .predicates
        .iter()
        .map(|p| {
            if p.op.is_lower() {
                return p.clone();
            }
            let op = p.op.flip();
            match &p.kind {
                PredicateKind::Reach(l) => {
                    Predicate { kind: PredicateKind::Invariant(l.negated()), op, bound: p.bound.complement() }
                }
                PredicateKind::Invariant(l) => {
                    Predicate { kind: PredicateKind::Reach(l.negated()), op, bound: p.bound.complement() }
                }
                PredicateKind::MeanPayoff { reward, flavor, negated } => Predicate {
                    kind: PredicateKind::MeanPayoff {
                        reward: reward.clone(),
                        flavor: flavor.dual(),
                        negated: !negated,
                    },
                    op,
                    bound: p.bound.neg(),
                },
            }
        })
        .collect();
    Query { predicates, ..q.clone() }
}

/// Logical negation: swaps quantifier and connective and complements every operator.
pub fn negate(q: &Query) -> Query {
    Query {
        quantifier: match q.quantifier {
            Quantifier::Exists => Quantifier::Forall,
            Quantifier::Forall => Quantifier::Exists,
        },
        connective: match q.connective {
            Connective::And => Connective::Or,
            Connective::Or => Connective::And,
        },
        predicates: q
            .predicates
            .iter()
            .map(|p| Predicate { op: p.op.complement(), ..p.clone() })
            .collect(),
    }
}

/// A comparison with a bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Bound {
    pub op: CmpOp,
    pub value: Value,
}

/// A reachability query on a [`crate::model::ReachForm`]: bound `i` constrains
/// `Pr(◇G_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachQuery {
    pub quantifier: Quantifier,
    pub connective: Connective,
    pub bounds: Vec<Bound>,
}

impl ReachQuery {
    pub fn new(quantifier: Quantifier, connective: Connective, bounds: Vec<(CmpOp, Value)>) -> ReachQuery {
        ReachQuery {
            quantifier,
            connective,
            bounds: bounds.into_iter().map(|(op, value)| Bound { op, value }).collect(),
        }
    }

    pub fn negate(&self) -> ReachQuery {
        ReachQuery {
            quantifier: match self.quantifier {
                Quantifier::Exists => Quantifier::Forall,
                Quantifier::Forall => Quantifier::Exists,
            },
            connective: match self.connective {
                Connective::And => Connective::Or,
                Connective::Or => Connective::And,
            },
            bounds: self.bounds.iter().map(|b| Bound { op: b.op.complement(), value: b.value.clone() }).collect(),
        }
    }

    /// Evaluates the query on a finite set of achievable probability vectors
    /// (one per scheduler under consideration).
    pub fn holds_on(&self, points: &[Vec<f64>]) -> bool {
        let sat = |v: &Vec<f64>| {
            let mut it = self.bounds.iter().zip(v).map(|(b, x)| b.op.holds(*x, b.value.approx()));
            match self.connective {
                Connective::And => it.all(|x| x),
                Connective::Or => it.any(|x| x),
            }
        };
        match self.quantifier {
            Quantifier::Exists => points.iter().any(sat),
            Quantifier::Forall => points.iter().all(sat),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct QueryJson {
    quantifier: String,
    connective: String,
    predicates: Vec<PredicateJson>,
}

#[derive(Serialize, Deserialize)]
struct PredicateJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    safe: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reward: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flavor: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    negated: bool,
    op: String,
    bound: serde_json::Value,
}

impl QueryJson {
    fn from_query(q: &Query) -> QueryJson {
        QueryJson {
            quantifier: match q.quantifier {
                Quantifier::Exists => "exists",
                Quantifier::Forall => "forall",
            }
            .into(),
            connective: match q.connective {
                Connective::And => "and",
                Connective::Or => "or",
            }
            .into(),
            predicates: q
                .predicates
                .iter()
                .map(|p| {
                    let mut j = PredicateJson {
                        kind: String::new(),
                        target: None,
                        safe: None,
                        reward: None,
                        flavor: None,
                        negated: false,
                        op: p.op.symbol().into(),
                        bound: serde_json::Value::String(p.bound.to_string()),
                    };
                    match &p.kind {
                        PredicateKind::Reach(l) => {
                            j.kind = "reach".into();
                            j.target = Some(l.to_string());
                        }
                        PredicateKind::Invariant(l) => {
                            j.kind = "invariant".into();
                            j.safe = Some(l.to_string());
                        }
                        PredicateKind::MeanPayoff { reward, flavor, negated } => {
                            j.kind = "mean-payoff".into();
                            j.reward = Some(reward.clone());
                            j.flavor = Some(
                                match flavor {
                                    Flavor::Liminf => "liminf",
                                    Flavor::Limsup => "limsup",
                                }
                                .into(),
                            );
                            j.negated = *negated;
                        }
                    }
                    j
                })
                .collect(),
        }
    }

    fn into_query(self) -> Result<Query> {
        let bad = |m: String| Error::InvalidQuery(m);
        let quantifier = match self.quantifier.as_str() {
            "exists" => Quantifier::Exists,
            "forall" => Quantifier::Forall,
            other => return Err(bad(format!("unknown quantifier `{other}`"))),
        };
        let connective = match self.connective.as_str() {
            "and" => Connective::And,
            "or" => Connective::Or,
            other => return Err(bad(format!("unknown connective `{other}`"))),
        };
        let mut predicates = Vec::new();
        for p in self.predicates {
            let op = CmpOp::parse(&p.op).ok_or_else(|| bad(format!("unknown operator `{}`", p.op)))?;
            let bound = match &p.bound {
                serde_json::Value::String(s) => Value::parse(s).map_err(bad)?,
                serde_json::Value::Number(n) => Value::parse(&n.to_string()).map_err(bad)?,
                other => return Err(bad(format!("bound must be a number or string, got {other}"))),
            };
            let kind = match p.kind.as_str() {
                "reach" => PredicateKind::Reach(LabelRef::new(
                    &p.target.ok_or_else(|| bad("reach predicate needs `target`".into()))?,
                )),
                "invariant" => PredicateKind::Invariant(LabelRef::new(
                    &p.safe.ok_or_else(|| bad("invariant predicate needs `safe`".into()))?,
                )),
                "mean-payoff" => PredicateKind::MeanPayoff {
                    reward: p.reward.ok_or_else(|| bad("mean-payoff predicate needs `reward`".into()))?,
                    flavor: match p.flavor.as_deref().unwrap_or("liminf") {
                        "liminf" => Flavor::Liminf,
                        "limsup" => Flavor::Limsup,
                        other => return Err(bad(format!("unknown flavor `{other}`"))),
                    },
                    negated: p.negated,
                },
                other => return Err(bad(format!("unknown predicate kind `{other}`"))),
            };
            predicates.push(Predicate { kind, op, bound });
        }
        let q = Query { quantifier, connective, predicates };
        q.validate()?;
        Ok(q)
    }
}
