//! One-term asymptotic numbers `c * exp(k * beta)`.
//!
//! A scalar is either the exact zero or a positive coefficient together with
//! an exact rational exponent. Sums keep only the dominant exponent (adding
//! coefficients on ties), products multiply coefficients and add exponents.
//! Because every quantity is positive no cancellation can occur, so the
//! leading term of any subtraction-free expression is computed exactly.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational exponent `k` of `exp(k * beta)`.
pub type Exponent = Ratio<i64>;

/// Positive coefficient: exact when built from rationals, `f64` otherwise.
#[derive(Clone, Debug)]
pub enum Coeff {
    Exact(BigRational),
    Float(f64),
}

impl Coeff {
    pub fn exact(num: i64, den: i64) -> Self {
        Coeff::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Integral floats become exact rationals, everything else stays a float.
    pub fn from_f64(v: f64) -> Self {
        if v.fract() == 0.0 && v.abs() < 9.0e15 {
            Coeff::Exact(BigRational::from_integer(BigInt::from(v as i64)))
        } else {
            Coeff::Float(v)
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Coeff::Exact(r) => ratio_to_f64(r),
            Coeff::Float(v) => *v,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Coeff::Exact(_))
    }

    fn is_positive(&self) -> bool {
        match self {
            Coeff::Exact(r) => r.is_positive(),
            Coeff::Float(v) => *v > 0.0 && v.is_finite(),
        }
    }

    fn add(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(a + b),
            _ => Coeff::Float(self.to_f64() + other.to_f64()),
        }
    }

    fn mul(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(a * b),
            _ => Coeff::Float(self.to_f64() * other.to_f64()),
        }
    }

    fn div(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(a / b),
            _ => Coeff::Float(self.to_f64() / other.to_f64()),
        }
    }

    /// Rational string `p/q` (or `p`) for exact coefficients.
    pub fn to_exact_string(&self) -> Option<String> {
        match self {
            Coeff::Exact(r) if r.is_integer() => Some(r.numer().to_string()),
            Coeff::Exact(r) => Some(format!("{}/{}", r.numer(), r.denom())),
            Coeff::Float(_) => None,
        }
    }

    /// Parses `p`, `p/q` or a decimal literal.
    pub fn parse(s: &str) -> Result<Coeff> {
        let t = normalize_minus(s.trim());
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("bad coefficient {s:?}")))?;
            let d: BigInt = d
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("bad coefficient {s:?}")))?;
            if d.is_zero() {
                return Err(Error::InvalidSpec(format!("zero denominator in {s:?}")));
            }
            return Ok(Coeff::Exact(BigRational::new(n, d)));
        }
        if let Ok(n) = t.parse::<BigInt>() {
            return Ok(Coeff::Exact(BigRational::from_integer(n)));
        }
        t.parse::<f64>()
            .map(Coeff::Float)
            .map_err(|_| Error::InvalidSpec(format!("bad coefficient {s:?}")))
    }
}

impl PartialEq for Coeff {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => a == b,
            _ => self.to_f64() == other.to_f64(),
        }
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) => n / d,
        _ => f64::NAN,
    }
}

fn normalize_minus(s: &str) -> String {
    s.replace('\u{2212}', "-")
}

/// Parses an exponent from `p/q`, an integer, or a binary-exact decimal.
pub fn parse_exponent(s: &str) -> Result<Exponent> {
    let t = normalize_minus(s.trim());
    if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n
            .trim()
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("bad exponent {s:?}")))?;
        let d: i64 = d
            .trim()
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("bad exponent {s:?}")))?;
        if d == 0 {
            return Err(Error::InvalidSpec(format!("zero denominator in {s:?}")));
        }
        return Ok(Ratio::new(n, d));
    }
    if let Ok(n) = t.parse::<i64>() {
        return Ok(Ratio::from_integer(n));
    }
    let v: f64 = t
        .parse()
        .map_err(|_| Error::InvalidSpec(format!("bad exponent {s:?}")))?;
    exponent_from_f64(v)
}

/// Converts a float exponent, accepting only values with an exact small rational form.
pub fn exponent_from_f64(v: f64) -> Result<Exponent> {
    if !v.is_finite() {
        return Err(Error::InvalidSpec(format!("non-finite exponent {v}")));
    }
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return Ok(Ratio::from_integer(v as i64));
    }
    match Ratio::<i64>::approximate_float(v) {
        Some(r) if *r.denom() <= 1 << 20 && (*r.numer() as f64 / *r.denom() as f64) == v => Ok(r),
        _ => Err(Error::InvalidSpec(format!(
            "exponent {v} has no exact rational form; write it as \"p/q\""
        ))),
    }
}

/// Canonical string form of an exponent: `p` or `p/q`.
pub fn format_exponent(k: &Exponent) -> String {
    if k.is_integer() {
        k.numer().to_string()
    } else {
        format!("{}/{}", k.numer(), k.denom())
    }
}

/// `c * exp(k * beta)` with `c > 0`, or the exact zero.
#[derive(Clone, Debug, PartialEq)]
pub enum AsymptoticScalar {
    Zero,
    Term { coeff: Coeff, exp: Exponent },
}

/// Result of comparing two scalars by asymptotic order as `beta` grows.
#[derive(Clone, Debug, PartialEq)]
pub enum AsymptoticOrder {
    /// `a / b -> 0`.
    Less,
    /// `a / b -> infinity`.
    Greater,
    /// Same order; `a / b` converges to the given positive ratio.
    Same(f64),
    /// Both are the exact zero.
    BothZero,
}

impl AsymptoticScalar {
    pub fn new(coeff: Coeff, exp: Exponent) -> Result<Self> {
        if !coeff.is_positive() {
            return Err(Error::InvalidSpec(format!(
                "asymptotic coefficient must be positive, got {}",
                coeff.to_f64()
            )));
        }
        Ok(AsymptoticScalar::Term { coeff, exp })
    }

    /// Float coefficient with an exponent `num/den`. Panics on a non-positive coefficient.
    pub fn from_parts(coeff: f64, num: i64, den: i64) -> Self {
        Self::new(Coeff::from_f64(coeff), Ratio::new(num, den)).expect("positive coefficient")
    }

    /// Exact coefficient `cn/cd` with exponent `en/ed`.
    pub fn exact(cn: i64, cd: i64, en: i64, ed: i64) -> Self {
        Self::new(Coeff::exact(cn, cd), Ratio::new(en, ed)).expect("positive coefficient")
    }

    pub fn one() -> Self {
        Self::exact(1, 1, 0, 1)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, AsymptoticScalar::Zero)
    }

    pub fn exp(&self) -> Option<Exponent> {
        match self {
            AsymptoticScalar::Zero => None,
            AsymptoticScalar::Term { exp, .. } => Some(*exp),
        }
    }

    pub fn coeff(&self) -> Option<&Coeff> {
        match self {
            AsymptoticScalar::Zero => None,
            AsymptoticScalar::Term { coeff, .. } => Some(coeff),
        }
    }

    /// Coefficient as `f64`, zero for the exact zero.
    pub fn coeff_f64(&self) -> f64 {
        self.coeff().map_or(0.0, Coeff::to_f64)
    }

    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (AsymptoticScalar::Zero, b) => b.clone(),
            (a, AsymptoticScalar::Zero) => a.clone(),
            (
                AsymptoticScalar::Term { coeff: ca, exp: ka },
                AsymptoticScalar::Term { coeff: cb, exp: kb },
            ) => match ka.cmp(kb) {
                Ordering::Greater => self.clone(),
                Ordering::Less => other.clone(),
                Ordering::Equal => AsymptoticScalar::Term {
                    coeff: ca.add(cb),
                    exp: *ka,
                },
            },
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        match (self, other) {
            (
                AsymptoticScalar::Term { coeff: ca, exp: ka },
                AsymptoticScalar::Term { coeff: cb, exp: kb },
            ) => AsymptoticScalar::Term {
                coeff: ca.mul(cb),
                exp: ka + kb,
            },
            _ => AsymptoticScalar::Zero,
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        match (self, other) {
            (_, AsymptoticScalar::Zero) => Err(Error::DivByZero),
            (AsymptoticScalar::Zero, _) => Ok(AsymptoticScalar::Zero),
            (
                AsymptoticScalar::Term { coeff: ca, exp: ka },
                AsymptoticScalar::Term { coeff: cb, exp: kb },
            ) => Ok(AsymptoticScalar::Term {
                coeff: ca.div(cb),
                exp: ka - kb,
            }),
        }
    }

    /// Compares exponents first; equal exponents give the limit ratio of coefficients.
    pub fn cmp_order(&self, other: &Self) -> AsymptoticOrder {
        match (self, other) {
            (AsymptoticScalar::Zero, AsymptoticScalar::Zero) => AsymptoticOrder::BothZero,
            (AsymptoticScalar::Zero, _) => AsymptoticOrder::Less,
            (_, AsymptoticScalar::Zero) => AsymptoticOrder::Greater,
            (
                AsymptoticScalar::Term { coeff: ca, exp: ka },
                AsymptoticScalar::Term { coeff: cb, exp: kb },
            ) => match ka.cmp(kb) {
                Ordering::Less => AsymptoticOrder::Less,
                Ordering::Greater => AsymptoticOrder::Greater,
                Ordering::Equal => AsymptoticOrder::Same(ca.div(cb).to_f64()),
            },
        }
    }

    /// Numeric value `c * exp(k * beta)`.
    pub fn eval(&self, beta: f64) -> Result<f64> {
        match self {
            AsymptoticScalar::Zero => Ok(0.0),
            AsymptoticScalar::Term { coeff, exp } => {
                let k = *exp.numer() as f64 / *exp.denom() as f64;
                let c = coeff.to_f64();
                let e = (k * beta).exp();
                let v = if e.is_finite() && e > 0.0 && c.is_finite() {
                    c * e
                } else {
                    (c.ln() + k * beta).exp()
                };
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::ScalarOverflow(format!(
                        "{} * exp({} * {beta})",
                        c,
                        format_exponent(exp)
                    )))
                }
            }
        }
    }
}

impl Add for &AsymptoticScalar {
    type Output = AsymptoticScalar;
    fn add(self, rhs: &AsymptoticScalar) -> AsymptoticScalar {
        AsymptoticScalar::add(self, rhs)
    }
}

impl Mul for &AsymptoticScalar {
    type Output = AsymptoticScalar;
    fn mul(self, rhs: &AsymptoticScalar) -> AsymptoticScalar {
        AsymptoticScalar::mul(self, rhs)
    }
}

impl fmt::Display for AsymptoticScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AsymptoticScalar::Zero => write!(f, "0"),
            AsymptoticScalar::Term { coeff, exp } => {
                let c = coeff
                    .to_exact_string()
                    .unwrap_or_else(|| format!("{}", coeff.to_f64()));
                write!(f, "{c}*e^({} b)", format_exponent(exp))
            }
        }
    }
}

/// Sum of an iterator of scalars in the semiring.
pub fn sum<'a, I: IntoIterator<Item = &'a AsymptoticScalar>>(iter: I) -> AsymptoticScalar {
    iter.into_iter()
        .fold(AsymptoticScalar::Zero, |acc, x| acc.add(x))
}
