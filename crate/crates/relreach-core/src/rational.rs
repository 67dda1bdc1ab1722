//! Exact rational numbers as used throughout the checker.
//!
//! All probabilities, rewards, thresholds and computed values are
//! arbitrary-precision rationals. Two textual forms are accepted:
//! a fraction `p/q` and a decimal such as `0.59`, which is read exactly
//! (59/100), never through floating point.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::str::FromStr;
use thiserror::Error;

pub type Rat = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RatParseError {
    #[error("empty rational literal")]
    Empty,
    #[error("malformed rational literal {0:?}")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

/// Parses `p/q`, an integer, or a decimal literal, with optional sign.
pub fn parse_rat(text: &str) -> Result<Rat, RatParseError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(RatParseError::Empty);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() {
        return Err(RatParseError::Malformed(text.to_string()));
    }
    let unsigned = if let Some((num, den)) = body.split_once('/') {
        let n = parse_digits(num).ok_or_else(|| RatParseError::Malformed(text.to_string()))?;
        let d = parse_digits(den).ok_or_else(|| RatParseError::Malformed(text.to_string()))?;
        if d.is_zero() {
            return Err(RatParseError::ZeroDenominator(text.to_string()));
        }
        Rat::new(n, d)
    } else if let Some((whole, frac)) = body.split_once('.') {
        // Decimal: read the digit string exactly over a power of ten.
        // An empty side is fine ("1." or ".5") but not both.
        if whole.is_empty() && frac.is_empty() {
            return Err(RatParseError::Malformed(text.to_string()));
        }
        let w = if whole.is_empty() {
            BigInt::zero()
        } else {
            parse_digits(whole).ok_or_else(|| RatParseError::Malformed(text.to_string()))?
        };
        let f = if frac.is_empty() {
            BigInt::zero()
        } else {
            parse_digits(frac).ok_or_else(|| RatParseError::Malformed(text.to_string()))?
        };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        Rat::new(w * &scale + f, scale)
    } else {
        let n = parse_digits(body).ok_or_else(|| RatParseError::Malformed(text.to_string()))?;
        Rat::from_integer(n)
    };
    Ok(if sign < 0 { -unsigned } else { unsigned })
}

fn parse_digits(s: &str) -> Option<BigInt> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(s).ok()
}

/// Canonical textual form: `p` for integers, `p/q` otherwise (q > 0).
pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

pub fn rat_one() -> Rat {
    Rat::one()
}

/// Rational from an integer pair, for literals in tests and generators.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Largest rational with denominator dividing 2^64 that is <= r.
pub fn round_down_dyadic(r: &Rat) -> Rat {
    let scale: BigInt = BigInt::one() << 64u32;
    let scaled = (r * Rat::from_integer(scale.clone())).floor();
    Rat::new(scaled.to_integer(), scale)
}

/// Smallest rational with denominator dividing 2^64 that is >= r.
pub fn round_up_dyadic(r: &Rat) -> Rat {
    let scale: BigInt = BigInt::one() << 64u32;
    let scaled = (r * Rat::from_integer(scale.clone())).ceil();
    Rat::new(scaled.to_integer(), scale)
}

/// Approximate double value, for human-readable reports only.
pub fn rat_to_f64(r: &Rat) -> f64 {
    let digits = 18u32;
    let scale = BigInt::from(10u64).pow(digits);
    let scaled = (r * Rat::from_integer(scale)).to_integer();
    let mut x = 0.0f64;
    let (sign, mag) = (scaled.signum(), scaled.abs());
    for digit in mag.to_string().bytes() {
        x = x * 10.0 + f64::from(digit - b'0');
    }
    let x = x / 10f64.powi(digits as i32);
    if sign < BigInt::zero() {
        -x
    } else {
        x
    }
}
