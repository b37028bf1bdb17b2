//! Numbers that remember whether they are known exactly.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// A probability, reward or bound.
///
/// Every value carries an `f64` approximation. Values read from text are also
/// kept as exact rationals; values computed in floating point are not, and are
/// only turned into rationals through [`Value::rationalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Value {
    approx: f64,
    exact: Option<Rational>,
}

impl Value {
    pub fn from_f64(x: f64) -> Value {
        Value { approx: x, exact: None }
    }

    pub fn from_rational(q: Rational) -> Value {
        Value { approx: rational_to_f64(&q), exact: Some(q) }
    }

    pub fn from_ratio(num: i64, den: i64) -> Value {
        Value::from_rational(Rational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Value {
        Value::from_ratio(0, 1)
    }

    pub fn one() -> Value {
        Value::from_ratio(1, 1)
    }

    pub fn approx(&self) -> f64 {
        self.approx
    }

    pub fn exact(&self) -> Option<&Rational> {
        self.exact.as_ref()
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Rounds to the nearest multiple of `1/den`, keeping an exact value as is.
    pub fn rationalize(&self, den: u64) -> Rational {
        match &self.exact {
            Some(q) => q.clone(),
            None => round_to_denominator(self.approx, den),
        }
    }

    pub fn neg(&self) -> Value {
        Value { approx: -self.approx, exact: self.exact.as_ref().map(|q| -q) }
    }

    /// `1 - self`, exact when possible.
    pub fn complement(&self) -> Value {
        match &self.exact {
            Some(q) => Value::from_rational(Rational::one() - q),
            None => Value::from_f64(1.0 - self.approx),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.exact {
            Some(q) => q.is_zero(),
            None => self.approx == 0.0,
        }
    }

    pub fn add(&self, other: &Value) -> Value {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Value::from_rational(a + b),
            _ => Value::from_f64(self.approx + other.approx),
        }
    }

    pub fn parse(text: &str) -> Result<Value, String> {
        parse_rational(text).map(Value::from_rational)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exact {
            Some(q) => write!(f, "{}", format_rational(q)),
            None => write!(f, "{}", self.approx),
        }
    }
}

impl FromStr for Value {
    type Err = String;
    fn from_str(s: &str) -> Result<Value, String> {
        Value::parse(s)
    }
}

pub fn format_rational(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn rational_to_f64(q: &Rational) -> f64 {
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => num_traits::ToPrimitive::to_f64(q).unwrap_or(f64::NAN),
    }
}

pub fn round_to_denominator(x: f64, den: u64) -> Rational {
    let scaled = (x * den as f64).round();
    let num = BigInt::from(scaled as i128);
    Rational::new(num, BigInt::from(den))
}

/// Parses `p/q`, integers and decimals (with optional exponent) exactly.
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("empty number".into());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return Err(format!("zero denominator in `{t}`"));
        }
        return Ok(n / d);
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = t[i + 1..].parse().map_err(|_| format!("bad exponent in `{t}`"))?;
            (&t[..i], e)
        }
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("not a number: `{t}`"));
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(format!("not a number: `{t}`"));
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut num: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().unwrap() };
    if negative {
        num = -num;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let q = if scale >= 0 {
        Rational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(q)
}

/// Arithmetic used by the constraint builders and the checker.
///
/// `f64` is the solver-facing instance; [`Rational`] gives exact checking.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_value(v: &Value) -> Result<Self>;
    fn from_i64(n: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn abs_val(&self) -> Self;
}

impl Scalar for f64 {
    fn from_value(v: &Value) -> Result<f64> {
        Ok(v.approx())
    }
    fn from_i64(n: i64) -> f64 {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs_val(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for Rational {
    fn from_value(v: &Value) -> Result<Rational> {
        v.exact().cloned().ok_or_else(|| Error::InexactValue(v.to_string()))
    }
    fn from_i64(n: i64) -> Rational {
        Rational::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn abs_val(&self) -> Rational {
        self.abs()
    }
}
