//! Scalar weights for measures.
//!
//! Every measure, transform and split in this crate is generic over a
//! [`Weight`]. Exact rational weights make the measure identities hold with
//! equality; floating weights trade that for speed.

use std::fmt::Debug;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Arbitrary precision rational, the exact arithmetic mode.
pub type Rational = BigRational;

/// Arithmetic mode of a weight type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithmeticMode {
    Exact,
    Float,
}

impl ArithmeticMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ArithmeticMode::Exact => "exact",
            ArithmeticMode::Float => "float",
        }
    }
}

impl FromStr for ArithmeticMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(ArithmeticMode::Exact),
            "float" => Ok(ArithmeticMode::Float),
            other => Err(format!("unknown arithmetic mode `{other}` (expected exact|float)")),
        }
    }
}

/// A nonnegative measure weight.
///
/// Implemented for `f32`, `f64` and [`Rational`].
pub trait Weight: Num + Signed + Clone + PartialOrd + Debug + Send + Sync + 'static {
    const MODE: ArithmeticMode;

    /// Slack allowed when deciding whether a mass equals one.
    fn mass_tolerance() -> Self;

    /// Default truncation tolerance for series and transforms.
    fn default_epsilon() -> Self;

    /// `num / den`, exact where the type permits.
    fn ratio(num: i64, den: i64) -> Self;

    fn from_count(n: u64) -> Self;

    fn as_f64(&self) -> f64;

    /// Parses a weight literal: `"3/8"`, an integer, or a decimal (float modes only
    /// accept decimals; the exact mode rejects them).
    fn parse_literal(s: &str) -> Result<Self, String>;

    /// Renders a literal that [`Weight::parse_literal`] reads back unchanged.
    fn to_literal(&self) -> String;

    fn pow_n(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self.clone();
        }
        acc
    }

    fn is_exact() -> bool {
        Self::MODE == ArithmeticMode::Exact
    }
}

fn parse_fraction<T: FromStr>(s: &str) -> Option<(T, T)> {
    let (n, d) = s.split_once('/')?;
    Some((n.trim().parse().ok()?, d.trim().parse().ok()?))
}

impl Weight for f64 {
    const MODE: ArithmeticMode = ArithmeticMode::Float;

    fn mass_tolerance() -> Self {
        1e-9
    }

    fn default_epsilon() -> Self {
        1e-6
    }

    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_count(n: u64) -> Self {
        n as f64
    }

    fn as_f64(&self) -> f64 {
        *self
    }

    fn parse_literal(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some((n, d)) = parse_fraction::<f64>(s) {
            if d == 0.0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            return Ok(n / d);
        }
        s.parse::<f64>().map_err(|e| format!("bad weight `{s}`: {e}"))
    }

    fn to_literal(&self) -> String {
        format!("{self:?}")
    }
}

impl Weight for f32 {
    const MODE: ArithmeticMode = ArithmeticMode::Float;

    fn mass_tolerance() -> Self {
        1e-5
    }

    fn default_epsilon() -> Self {
        1e-4
    }

    fn ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn from_count(n: u64) -> Self {
        n as f32
    }

    fn as_f64(&self) -> f64 {
        *self as f64
    }

    fn parse_literal(s: &str) -> Result<Self, String> {
        f64::parse_literal(s).map(|v| v as f32)
    }

    fn to_literal(&self) -> String {
        format!("{self:?}")
    }
}

impl Weight for Rational {
    const MODE: ArithmeticMode = ArithmeticMode::Exact;

    fn mass_tolerance() -> Self {
        Self::zero()
    }

    fn default_epsilon() -> Self {
        Rational::new(BigInt::one(), BigInt::from(1u64 << 20))
    }

    fn ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_count(n: u64) -> Self {
        Rational::from_integer(BigInt::from(n))
    }

    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn parse_literal(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some((n, d)) = parse_fraction::<BigInt>(s) {
            if d.is_zero() {
                return Err(format!("zero denominator in `{s}`"));
            }
            return Ok(Rational::new(n, d));
        }
        if let Ok(n) = s.parse::<BigInt>() {
            return Ok(Rational::from_integer(n));
        }
        Err(format!("exact weights must be fractions `num/den`, got `{s}`"))
    }

    fn to_literal(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }
}

/// Converts a finite `f64` into an exact rational (the binary value, not a
/// decimal approximation).
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    Rational::from_f64(x)
}
