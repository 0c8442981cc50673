//! Dual-backend scalar: exact rationals, or floats carrying an absolute error bound.
//!
//! Exact values never degrade silently. Any operation that mixes an exact and
//! an approximate operand promotes to the approximate backend and widens the
//! error bound accordingly.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

#[derive(Clone, Debug, PartialEq)]
pub enum Number {
    Exact(BigRational),
    /// `value` with `|true - value| <= err`.
    Approx {
        value: f64,
        err: f64,
    },
}

/// Parse `"p/q"` or `"p"` into a rational.
pub fn parse_rational(s: &str) -> Result<BigRational, Error> {
    BigRational::from_str(s.trim()).map_err(|_| Error::Parse(format!("not a rational literal: {s:?}")))
}

pub fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

pub fn rat_int(p: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(p))
}

/// `2^e` as an exact rational, `e` may be negative.
pub fn pow2(e: i64) -> BigRational {
    let mag = BigInt::one() << e.unsigned_abs();
    if e >= 0 {
        BigRational::from_integer(mag)
    } else {
        BigRational::new(BigInt::one(), mag)
    }
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn rounding(v: f64) -> f64 {
    v.abs() * f64::EPSILON
}

impl Number {
    pub fn zero() -> Self {
        Number::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Number::Exact(BigRational::one())
    }

    pub fn int(p: i64) -> Self {
        Number::Exact(rat_int(p))
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        Number::Exact(rat(p, q))
    }

    pub fn pow2(e: i64) -> Self {
        Number::Exact(pow2(e))
    }

    pub fn approx(value: f64, err: f64) -> Self {
        Number::Approx { value, err: err.abs() }
    }

    /// Float carrying only its own representation error.
    pub fn float(value: f64) -> Self {
        Number::Approx { value, err: 0.0 }
    }

    /// Exact binary value of a finite float.
    pub fn exact_from_f64(value: f64) -> Option<Self> {
        BigRational::from_float(value).map(Number::Exact)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Number::Exact(r) => Some(r),
            Number::Approx { .. } => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(r) => rat_to_f64(r),
            Number::Approx { value, .. } => *value,
        }
    }

    /// Absolute error bound; zero for exact values.
    pub fn error_bound(&self) -> f64 {
        match self {
            Number::Exact(_) => 0.0,
            Number::Approx { err, .. } => *err,
        }
    }

    /// Convert to the approximate backend.
    pub fn to_approx(&self) -> Self {
        match self {
            Number::Exact(r) => {
                let v = rat_to_f64(r);
                Number::Approx { value: v, err: rounding(v) }
            }
            a => a.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Number::Exact(r) => r.is_zero(),
            Number::Approx { value, err } => *value == 0.0 && *err == 0.0,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Number::Exact(r) => r.is_negative(),
            Number::Approx { value, .. } => *value < 0.0,
        }
    }

    pub fn abs(&self) -> Self {
        match self {
            Number::Exact(r) => Number::Exact(r.abs()),
            Number::Approx { value, err } => Number::Approx { value: value.abs(), err: *err },
        }
    }

    /// Value comparison. Exact pairs compare exactly; anything else compares
    /// the central float values.
    pub fn cmp_value(&self, other: &Number) -> Ordering {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => a.cmp(b),
            _ => self.to_f64().total_cmp(&other.to_f64()),
        }
    }

    pub fn max(self, other: Number) -> Number {
        if other.cmp_value(&self) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Number) -> Number {
        if other.cmp_value(&self) == Ordering::Less {
            other
        } else {
            self
        }
    }

    pub fn recip(&self) -> Result<Number, Error> {
        Number::one().checked_div(self)
    }

    pub fn checked_div(&self, rhs: &Number) -> Result<Number, Error> {
        match (self, rhs) {
            (Number::Exact(a), Number::Exact(b)) => {
                if b.is_zero() {
                    Err(Error::DivisionByZero)
                } else {
                    Ok(Number::Exact(a / b))
                }
            }
            _ => {
                let (a, ea) = self.parts();
                let (b, eb) = rhs.parts();
                if b.abs() <= eb || b == 0.0 {
                    return Err(Error::DivisionByZero);
                }
                let v = a / b;
                let err = (ea + v.abs() * eb) / (b.abs() - eb) + rounding(v);
                Ok(Number::Approx { value: v, err })
            }
        }
    }

    fn parts(&self) -> (f64, f64) {
        match self {
            Number::Exact(r) => {
                let v = rat_to_f64(r);
                (v, rounding(v) * 0.5)
            }
            Number::Approx { value, err } => (*value, *err),
        }
    }

    pub fn sum<'a, I: IntoIterator<Item = &'a Number>>(items: I) -> Number {
        items.into_iter().fold(Number::zero(), |acc, x| &acc + x)
    }
}

impl Default for Number {
    fn default() -> Self {
        Number::zero()
    }
}

impl From<BigRational> for Number {
    fn from(r: BigRational) -> Self {
        Number::Exact(r)
    }
}

impl From<i64> for Number {
    fn from(p: i64) -> Self {
        Number::int(p)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(r) => write!(f, "{r}"),
            Number::Approx { value, err } if *err > 0.0 => write!(f, "{value:e} ± {err:.1e}"),
            Number::Approx { value, .. } => write!(f, "{value:e}"),
        }
    }
}

impl FromStr for Number {
    type Err = Error;

    /// `"p/q"` and integer literals are exact; anything with a decimal point or
    /// exponent is parsed as a float.
    fn from_str(s: &str) -> Result<Self, Error> {
        let t = s.trim();
        if t.contains(['.', 'e', 'E']) {
            let v: f64 = t.parse().map_err(|_| Error::Parse(format!("not a number: {s:?}")))?;
            Ok(Number::Approx { value: v, err: rounding(v) })
        } else {
            parse_rational(t).map(Number::Exact)
        }
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $imp:ident) => {
        impl<'a> $tr<&'a Number> for &'a Number {
            type Output = Number;
            fn $method(self, rhs: &'a Number) -> Number {
                $imp(self, rhs)
            }
        }
        impl $tr<Number> for Number {
            type Output = Number;
            fn $method(self, rhs: Number) -> Number {
                $imp(&self, &rhs)
            }
        }
        impl<'a> $tr<&'a Number> for Number {
            type Output = Number;
            fn $method(self, rhs: &'a Number) -> Number {
                $imp(&self, rhs)
            }
        }
        impl<'a> $tr<Number> for &'a Number {
            type Output = Number;
            fn $method(self, rhs: Number) -> Number {
                $imp(self, &rhs)
            }
        }
    };
}

fn add_impl(a: &Number, b: &Number) -> Number {
    match (a, b) {
        (Number::Exact(x), Number::Exact(y)) => Number::Exact(x + y),
        _ => {
            let (x, ex) = a.parts();
            let (y, ey) = b.parts();
            let v = x + y;
            Number::Approx { value: v, err: ex + ey + rounding(v) }
        }
    }
}

fn sub_impl(a: &Number, b: &Number) -> Number {
    add_impl(a, &-b)
}

fn mul_impl(a: &Number, b: &Number) -> Number {
    match (a, b) {
        (Number::Exact(x), Number::Exact(y)) => Number::Exact(x * y),
        // exact zero annihilates without widening the bound
        (Number::Exact(x), _) | (_, Number::Exact(x)) if x.is_zero() => Number::zero(),
        _ => {
            let (x, ex) = a.parts();
            let (y, ey) = b.parts();
            let v = x * y;
            Number::Approx { value: v, err: x.abs() * ey + y.abs() * ex + ex * ey + rounding(v) }
        }
    }
}

fn div_impl(a: &Number, b: &Number) -> Number {
    a.checked_div(b).expect("division by zero")
}

forward_binop!(Add, add, add_impl);
forward_binop!(Sub, sub, sub_impl);
forward_binop!(Mul, mul, mul_impl);
forward_binop!(Div, div, div_impl);

impl Neg for &Number {
    type Output = Number;
    fn neg(self) -> Number {
        match self {
            Number::Exact(r) => Number::Exact(-r),
            Number::Approx { value, err } => Number::Approx { value: -value, err: *err },
        }
    }
}

impl Neg for Number {
    type Output = Number;
    fn neg(self) -> Number {
        -&self
    }
}

impl Serialize for Number {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Number::Exact(r) => s.serialize_str(&r.to_string()),
            Number::Approx { value, .. } => s.serialize_f64(*value),
        }
    }
}

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => parse_rational(&s).map(Number::Exact).map_err(serde::de::Error::custom),
            Raw::Float(v) => Ok(Number::Approx { value: v, err: rounding(v) }),
        }
    }
}

/// Serde adapter for `BigRational` as a `"p/q"` string.
pub mod rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(r: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
            match r {
                Some(r) => s.serialize_some(&r.to_string()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigRational>, D::Error> {
            let s = Option::<String>::deserialize(d)?;
            s.map(|s| parse_rational(&s).map_err(serde::de::Error::custom)).transpose()
        }
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for r in v {
                seq.serialize_element(&r.to_string())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigRational>, D::Error> {
            let v = Vec::<String>::deserialize(d)?;
            v.iter().map(|s| parse_rational(s).map_err(serde::de::Error::custom)).collect()
        }
    }
}
