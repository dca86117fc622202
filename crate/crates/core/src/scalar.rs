//! Scalar abstraction shared by every module.
//!
//! Linear quantities (masses, mixtures, conditionals, advantages, alpha
//! tables) are computed in a generic [`Scalar`]. With [`Rational`] these are
//! exact; with `f64`/`f32` they carry the usual floating-point rounding and
//! comparisons go through [`Scalar::approx_eq`]. Quantities involving square
//! roots (Hellinger, Rényi-½) are always evaluated in `f64`.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational used for the exact arithmetic mode.
pub type Rational = BigRational;

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Num
    + Signed
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// True when arithmetic is exact (no rounding anywhere).
    const EXACT: bool;
    /// Short name used in reports (`rational`, `f64`, ...).
    const NAME: &'static str;

    /// Absolute tolerance for equality and mass-sum checks; zero when exact.
    fn tolerance() -> f64;

    /// Converts an `f64` through its shortest round-trip decimal form, so
    /// `0.1` becomes exactly `1/10` in rational mode.
    fn from_f64_decimal(x: f64) -> Self;

    fn as_f64(&self) -> f64;

    fn from_biguint(n: &BigUint) -> Self;

    fn from_bigint(n: &BigInt) -> Self;

    fn floor_int(&self) -> BigInt;

    /// Parses a decimal (`0.25`, `1e-3`) or a ratio (`3/8`).
    fn parse_value(s: &str) -> Result<Self>;

    /// Canonical text form; parses back to an identical value.
    fn to_repr(&self) -> String;

    fn approx_eq(&self, other: &Self) -> bool {
        if Self::EXACT {
            self == other
        } else {
            let (a, b) = (self.as_f64(), other.as_f64());
            (a - b).abs() <= Self::tolerance() * (1.0 + a.abs().max(b.abs()))
        }
    }

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize fits every scalar")
    }

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    fn clamp01(self) -> Self {
        if self < Self::zero() {
            Self::zero()
        } else if self > Self::one() {
            Self::one()
        } else {
            self
        }
    }

    /// `coefficient * Π base_i^exp_i`; the float impls work in log space so
    /// large multinomial coefficients do not overflow.
    fn weighted_power_product(coefficient: &BigUint, factors: &[(Self, u32)]) -> Self {
        let mut acc = Self::from_biguint(coefficient);
        for (base, exp) in factors {
            for _ in 0..*exp {
                acc = acc * base.clone();
            }
        }
        acc
    }
}

fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    // Decimal with optional exponent, parsed digit by digit so it stays exact.
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        value = -value;
    }
    Ok(value)
}

impl Scalar for Rational {
    const EXACT: bool = true;
    const NAME: &'static str = "rational";

    fn tolerance() -> f64 {
        0.0
    }

    fn from_f64_decimal(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite parameter {x}");
        parse_rational(&format!("{x:e}")).expect("Rust float formatting is parseable")
    }

    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_biguint(n: &BigUint) -> Self {
        Rational::from_integer(BigInt::from(n.clone()))
    }

    fn from_bigint(n: &BigInt) -> Self {
        Rational::from_integer(n.clone())
    }

    fn floor_int(&self) -> BigInt {
        self.floor().to_integer()
    }

    fn parse_value(s: &str) -> Result<Self> {
        parse_rational(s)
    }

    fn to_repr(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

macro_rules! float_scalar {
    ($t:ty, $name:literal, $tol:expr) => {
        impl Scalar for $t {
            const EXACT: bool = false;
            const NAME: &'static str = $name;

            fn tolerance() -> f64 {
                $tol
            }

            fn from_f64_decimal(x: f64) -> Self {
                x as $t
            }

            fn as_f64(&self) -> f64 {
                *self as f64
            }

            fn from_biguint(n: &BigUint) -> Self {
                ToPrimitive::to_f64(n).unwrap_or(f64::INFINITY) as $t
            }

            fn from_bigint(n: &BigInt) -> Self {
                ToPrimitive::to_f64(n).unwrap_or(f64::NAN) as $t
            }

            fn floor_int(&self) -> BigInt {
                BigInt::from_f64(self.floor() as f64).expect("finite value")
            }

            fn parse_value(s: &str) -> Result<Self> {
                let s = s.trim();
                if s.contains('/') {
                    let r = parse_rational(s)?;
                    return Ok(r.as_f64() as $t);
                }
                s.parse::<$t>()
                    .map_err(|_| Error::Parse(format!("not a number: {s:?}")))
            }

            fn to_repr(&self) -> String {
                format!("{}", self)
            }

            fn weighted_power_product(coefficient: &BigUint, factors: &[(Self, u32)]) -> Self {
                let mut log = ToPrimitive::to_f64(coefficient).filter(|c| c.is_finite()).map(f64::ln).unwrap_or_else(|| {
                    // bits * ln 2 is within a factor 2 of the true log; refine with the top bits.
                    let bits = coefficient.bits();
                    let shift = bits.saturating_sub(52);
                    let top: BigUint = coefficient >> shift;
                    ToPrimitive::to_f64(&top).unwrap().ln() + shift as f64 * std::f64::consts::LN_2
                });
                for (base, exp) in factors {
                    if *exp == 0 {
                        continue;
                    }
                    if *base <= 0.0 {
                        return 0.0;
                    }
                    log += *exp as f64 * (*base as f64).ln();
                }
                log.exp() as $t
            }
        }
    };
}

float_scalar!(f64, "f64", 1e-12);
float_scalar!(f32, "f32", 1e-6);

/// Sum of a sequence of scalars.
pub fn sum<'a, S: Scalar>(values: impl IntoIterator<Item = &'a S>) -> S {
    values.into_iter().fold(S::zero(), |acc, v| acc + v.clone())
}
