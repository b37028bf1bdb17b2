//! Certificate files: JSON with every vector keyed by state, pair or
//! objective name, so a checker can rebuild the systems from the model alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{Error, Result};
use crate::lp::CheckReport;
use crate::model::{Mdp, ReachForm};
use crate::mp_cert::{check_mp_certificate, Flows, GainBias, MpCertificate, MpQuery};
use crate::product::{reduce_query, ProductOptions};
use crate::query::{Family, Query};
use crate::reach_cert::{check_certificate, ReachCertificate, CERT_TOL};
use crate::value::{format_rational, parse_rational, rational_to_f64, round_to_denominator, Rational, Scalar};

pub const FORMAT: &str = "farkas-certificate/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Certifies {
    Query,
    Negation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Float,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub format: String,
    /// The query as the user wrote it.
    pub query: Json,
    pub certifies: Certifies,
    /// `reach-invariant` or `mean-payoff`.
    pub family: String,
    /// `exists-and`, `forall-or`, `exists-or` or `forall-and`.
    pub variant: String,
    /// `quotient` for reach/invariant queries, `model` for mean-payoff.
    pub level: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disjunct: Option<usize>,
    pub vectors: BTreeMap<String, BTreeMap<String, Json>>,
}

impl CertificateFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap() + "\n"
    }

    pub fn from_json(text: &str) -> Result<CertificateFile> {
        let f: CertificateFile =
            serde_json::from_str(text).map_err(|e| Error::ShapeMismatch(format!("certificate file: {e}")))?;
        if f.format != FORMAT {
            return Err(Error::ShapeMismatch(format!("unknown certificate format `{}`", f.format)));
        }
        Ok(f)
    }
}

/// Numbers as they appear in certificate files.
pub trait FileScalar: Scalar {
    fn to_json(&self) -> Json;
    /// Reads a number; `den` rounds floats in exact mode.
    fn from_json(v: &Json, den: Option<u64>) -> Result<Self>;
}

impl FileScalar for f64 {
    fn to_json(&self) -> Json {
        serde_json::Number::from_f64(*self).map_or(Json::Null, Json::Number)
    }

    fn from_json(v: &Json, _den: Option<u64>) -> Result<f64> {
        match v {
            Json::Number(n) => n.as_f64().ok_or_else(|| Error::ShapeMismatch(format!("bad number {n}"))),
            Json::String(s) => parse_rational(s).map(|q| rational_to_f64(&q)).map_err(Error::ShapeMismatch),
            other => Err(Error::ShapeMismatch(format!("expected a number, got {other}"))),
        }
    }
}

impl FileScalar for Rational {
    fn to_json(&self) -> Json {
        Json::String(format_rational(self))
    }

    fn from_json(v: &Json, den: Option<u64>) -> Result<Rational> {
        match v {
            Json::String(s) => parse_rational(s).map_err(Error::ShapeMismatch),
            Json::Number(n) => match (n.as_i64(), den) {
                (Some(i), _) => Ok(Rational::from_i64(i)),
                (None, Some(d)) => Ok(round_to_denominator(n.as_f64().unwrap_or(f64::NAN), d)),
                (None, None) => Err(Error::InexactValue(n.to_string())),
            },
            other => Err(Error::ShapeMismatch(format!("expected a number, got {other}"))),
        }
    }
}

fn encode<N: FileScalar>(keys: &[String], v: &[N]) -> BTreeMap<String, Json> {
    keys.iter().cloned().zip(v.iter().map(FileScalar::to_json)).collect()
}

fn decode<N: FileScalar>(
    vectors: &BTreeMap<String, BTreeMap<String, Json>>,
    name: &str,
    keys: &[String],
    den: Option<u64>,
) -> Result<Vec<N>> {
    let mut out = vec![N::zero(); keys.len()];
    let Some(entries) = vectors.get(name) else {
        return Err(Error::ShapeMismatch(format!("vector `{name}` is missing")));
    };
    let index: BTreeMap<&str, usize> = keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    for (k, v) in entries {
        let i = *index
            .get(k.as_str())
            .ok_or_else(|| Error::ShapeMismatch(format!("vector `{name}` has unknown key `{k}`")))?;
        out[i] = N::from_json(v, den)?;
    }
    Ok(out)
}

fn objective_keys(k: usize) -> Vec<String> {
    (0..k).map(|i| i.to_string()).collect()
}

fn state_keys(mdp: &Mdp) -> Vec<String> {
    mdp.state_names().to_vec()
}

fn pair_keys(mdp: &Mdp) -> Vec<String> {
    (0..mdp.num_pairs()).map(|p| mdp.pair_name(p)).collect()
}

fn reach_keys(rf: &ReachForm) -> (Vec<String>, Vec<String>) {
    let m = rf.mdp();
    let rows = rf.rows().iter().map(|&p| m.pair_name(p)).collect();
    let cols = rf.columns().iter().map(|&s| m.state_name(s).to_string()).collect();
    (rows, cols)
}

fn skeleton(query: &Query, certifies: Certifies, family: &str, variant: &str, level: &str, mode: Mode) -> CertificateFile {
    CertificateFile {
        format: FORMAT.into(),
        query: query.to_json_value(),
        certifies,
        family: family.into(),
        variant: variant.into(),
        level: level.into(),
        mode,
        tolerance: if mode == Mode::Float { Some(CERT_TOL) } else { None },
        disjunct: None,
        vectors: BTreeMap::new(),
    }
}

fn mode_of<N: FileScalar>() -> Mode {
    if std::any::type_name::<N>() == std::any::type_name::<f64>() {
        Mode::Float
    } else {
        Mode::Exact
    }
}

pub fn reach_to_file<N: FileScalar>(
    rf: &ReachForm,
    query: &Query,
    certifies: Certifies,
    cert: &ReachCertificate<N>,
) -> CertificateFile {
    let (rows, cols) = reach_keys(rf);
    let k = rf.num_objectives();
    let mut f = skeleton(query, certifies, "reach-invariant", cert.query_type().tag(), "quotient", mode_of::<N>());
    match cert {
        ReachCertificate::ExistsAnd { y } => {
            f.vectors.insert("y".into(), encode(&rows, y));
        }
        ReachCertificate::ExistsOr { index, y } => {
            f.disjunct = Some(*index);
            f.vectors.insert("y".into(), encode(&rows, y));
        }
        ReachCertificate::ForallOr { x, z } => {
            f.vectors.insert("x".into(), encode(&cols, x));
            f.vectors.insert("z".into(), encode(&objective_keys(k), z));
        }
        ReachCertificate::ForallAnd { xs } => {
            for (i, x) in xs.iter().enumerate() {
                f.vectors.insert(format!("x[{i}]"), encode(&cols, x));
            }
        }
    }
    f
}

pub fn reach_from_file<N: FileScalar>(rf: &ReachForm, f: &CertificateFile, den: Option<u64>) -> Result<ReachCertificate<N>> {
    let (rows, cols) = reach_keys(rf);
    let k = rf.num_objectives();
    let v = &f.vectors;
    Ok(match f.variant.as_str() {
        "exists-and" => ReachCertificate::ExistsAnd { y: decode(v, "y", &rows, den)? },
        "exists-or" => ReachCertificate::ExistsOr {
            index: f.disjunct.ok_or_else(|| Error::ShapeMismatch("exists-or needs `disjunct`".into()))?,
            y: decode(v, "y", &rows, den)?,
        },
        "forall-or" => ReachCertificate::ForallOr {
            x: decode(v, "x", &cols, den)?,
            z: decode(v, "z", &objective_keys(k), den)?,
        },
        "forall-and" => ReachCertificate::ForallAnd {
            xs: (0..k).map(|i| decode(v, &format!("x[{i}]"), &cols, den)).collect::<Result<_>>()?,
        },
        other => return Err(Error::ShapeMismatch(format!("unknown variant `{other}`"))),
    })
}

pub fn mp_to_file<N: FileScalar>(
    mdp: &Mdp,
    query: &Query,
    certifies: Certifies,
    cert: &MpCertificate<N>,
) -> CertificateFile {
    let (pairs, states) = (pair_keys(mdp), state_keys(mdp));
    let mut f = skeleton(query, certifies, "mean-payoff", cert.query_type().tag(), "model", mode_of::<N>());
    let flows = |f: &mut CertificateFile, c: &Flows<N>| {
        f.vectors.insert("x".into(), encode(&pairs, &c.x));
        f.vectors.insert("y".into(), encode(&pairs, &c.y));
        f.vectors.insert("z".into(), encode(&states, &c.z));
    };
    let gain = |f: &mut CertificateFile, c: &GainBias<N>, suffix: &str| {
        f.vectors.insert(format!("g{suffix}"), encode(&states, &c.g));
        f.vectors.insert(format!("b{suffix}"), encode(&states, &c.b));
        f.vectors.insert(format!("z{suffix}"), encode(&objective_keys(c.z.len()), &c.z));
    };
    match cert {
        MpCertificate::ExistsAnd(c) => flows(&mut f, c),
        MpCertificate::ExistsOr { index, flows: c } => {
            f.disjunct = Some(*index);
            flows(&mut f, c);
        }
        MpCertificate::ForallOr(c) => gain(&mut f, c, ""),
        MpCertificate::ForallAnd(cs) => {
            for (i, c) in cs.iter().enumerate() {
                gain(&mut f, c, &format!("[{i}]"));
            }
        }
    }
    f
}

pub fn mp_from_file<N: FileScalar>(mdp: &Mdp, k: usize, f: &CertificateFile, den: Option<u64>) -> Result<MpCertificate<N>> {
    let (pairs, states) = (pair_keys(mdp), state_keys(mdp));
    let v = &f.vectors;
    let flows = || -> Result<Flows<N>> {
        Ok(Flows { x: decode(v, "x", &pairs, den)?, y: decode(v, "y", &pairs, den)?, z: decode(v, "z", &states, den)? })
    };
    let gain = |suffix: &str, k: usize| -> Result<GainBias<N>> {
        Ok(GainBias {
            g: decode(v, &format!("g{suffix}"), &states, den)?,
            b: decode(v, &format!("b{suffix}"), &states, den)?,
            z: decode(v, &format!("z{suffix}"), &objective_keys(k), den)?,
        })
    };
    Ok(match f.variant.as_str() {
        "exists-and" => MpCertificate::ExistsAnd(flows()?),
        "exists-or" => MpCertificate::ExistsOr {
            index: f.disjunct.ok_or_else(|| Error::ShapeMismatch("exists-or needs `disjunct`".into()))?,
            flows: flows()?,
        },
        "forall-or" => MpCertificate::ForallOr(gain("", k)?),
        "forall-and" => MpCertificate::ForallAnd((0..k).map(|i| gain(&format!("[{i}]"), 1)).collect::<Result<_>>()?),
        other => return Err(Error::ShapeMismatch(format!("unknown variant `{other}`"))),
    })
}

/// How to read the numbers of a file being checked.
#[derive(Clone, Copy, Debug, Default)]
pub struct CheckOptions {
    /// Check in rational arithmetic with zero slack.
    pub exact: bool,
    /// Denominator for rounding float entries in exact mode.
    pub denominator: Option<u64>,
    /// Tolerance in float mode; defaults to the file's.
    pub tolerance: Option<f64>,
    pub product: ProductOptions,
}

/// Checks `file` against `mdp` and `query`, rebuilding every system from
/// scratch. A query that differs from the file's echo is a shape mismatch.
pub fn check_file(mdp: &Mdp, query: &Query, file: &CertificateFile, opts: &CheckOptions) -> Result<CheckReport> {
    let echo = Query::from_json_value(&file.query)?;
    if echo != *query {
        return Err(Error::ShapeMismatch("the certificate was issued for a different query".into()));
    }
    let eps = opts.tolerance.or(file.tolerance).unwrap_or(CERT_TOL);
    match query.validate()? {
        Family::ReachInvariant => {
            if file.family != "reach-invariant" {
                return Err(Error::ShapeMismatch(format!("family `{}` for a reach/invariant query", file.family)));
            }
            let red = reduce_query(mdp, query, &opts.product)?;
            let q = match file.certifies {
                Certifies::Query => red.query.clone(),
                Certifies::Negation => red.query.negate(),
            };
            if opts.exact {
                let c: ReachCertificate<Rational> = reach_from_file(&red.reach_form, file, opts.denominator)?;
                let zero = Rational::from_i64(0);
                check_certificate(&red.reach_form, &q, &c, &zero, &zero)
            } else {
                let c: ReachCertificate<f64> = reach_from_file(&red.reach_form, file, None)?;
                check_certificate(&red.reach_form, &q, &c, &eps, &eps.min(crate::lp::STRICT_EPS))
            }
        }
        Family::MeanPayoff => {
            if file.family != "mean-payoff" {
                return Err(Error::ShapeMismatch(format!("family `{}` for a mean-payoff query", file.family)));
            }
            let mq = MpQuery::new(mdp, query)?;
            let q = match file.certifies {
                Certifies::Query => mq,
                Certifies::Negation => mq.negate(),
            };
            let k = q.bounds.len();
            if opts.exact {
                let c: MpCertificate<Rational> = mp_from_file(mdp, k, file, opts.denominator)?;
                let zero = Rational::from_i64(0);
                check_mp_certificate(mdp, &q, &c, &zero, &zero)
            } else {
                let c: MpCertificate<f64> = mp_from_file(mdp, k, file, None)?;
                check_mp_certificate(mdp, &q, &c, &eps, &eps.min(crate::lp::STRICT_EPS))
            }
        }
    }
}
