//! Exact rational scalars and parsing of decimal / fraction literals.
//!
//! Matrix entries are accepted either as decimal strings ("1.25") or as
//! fractions ("5/4"). Both forms are exact, so the rational representation
//! of an input file is canonical whenever the caller asks for it.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{Pow, Signed, ToPrimitive, Zero};
use std::str::FromStr;
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseRationalError {
    #[error("empty numeric literal")]
    Empty,
    #[error("invalid numeric literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Parse a decimal ("3", "-0.25") or fraction ("3/2") literal exactly.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    if let Some((num, den)) = s.split_once('/') {
        let n =
            BigInt::from_str(num.trim()).map_err(|_| ParseRationalError::Invalid(s.to_string()))?;
        let d =
            BigInt::from_str(den.trim()).map_err(|_| ParseRationalError::Invalid(s.to_string()))?;
        if d.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(s.to_string()));
        }
        return Ok(Rational::new(n, d));
    }
    parse_decimal(s).ok_or_else(|| ParseRationalError::Invalid(s.to_string()))
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (sign, digits) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => match s.strip_prefix('+') {
            Some(rest) => (1, rest),
            None => (1, s),
        },
    };
    if digits.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let mut numer = if int_part.is_empty() {
        BigInt::from(0)
    } else {
        BigInt::from_str(int_part).ok()?
    };
    let mut denom = BigInt::from(1);
    for c in frac_part.chars() {
        numer = numer * 10 + (c as u8 - b'0');
        denom *= 10;
    }
    Some(Rational::new(BigInt::from(sign) * numer, denom))
}

/// Round-to-nearest conversion to f64.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// Exact integer power, valid for any sign of the exponent on non-zero values.
pub fn pow_i32(r: &Rational, e: i32) -> Rational {
    Pow::pow(r.clone(), e)
}

/// Render as "p/q", or just "p" for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Decimal rendering at 12 significant digits.
pub fn format_decimal(r: &Rational) -> String {
    format_f64(to_f64(r))
}

/// 12-significant-digit rendering used by all CLI decimal output.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{:.*e}", 11, x);
    // Re-parse so 0.383333333333 prints without the exponent when small.
    let v: f64 = s.parse().unwrap();
    if v.abs() >= 1e-4 && v.abs() < 1e12 {
        let mag = v.abs().log10().floor() as i32;
        let decimals = (11 - mag).max(0) as usize;
        let mut out = format!("{:.*}", decimals, v);
        if out.contains('.') {
            while out.ends_with('0') {
                out.pop();
            }
            if out.ends_with('.') {
                out.pop();
            }
        }
        out
    } else {
        s
    }
}

pub fn rational_abs(r: &Rational) -> Rational {
    r.abs()
}
