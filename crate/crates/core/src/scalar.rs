//! Exact scalar arithmetic: arbitrary-precision rationals and complex
//! rationals with `p/q` string round-tripping.

use num::bigint::BigInt;
use num::complex::Complex;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use thiserror::Error;

/// Arbitrary-precision rational, always in lowest terms with positive
/// denominator (maintained by `BigRational` itself).
pub type Rat = BigRational;

/// Complex number with exact rational real and imaginary parts.
pub type CRat = Complex<Rat>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScalarError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Builds a rational from machine integers.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Builds an integer rational.
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Builds a real complex rational.
pub fn creal(r: Rat) -> CRat {
    Complex::new(r, Rat::zero())
}

/// Builds a complex rational from parts.
pub fn crat(re: Rat, im: Rat) -> CRat {
    Complex::new(re, im)
}

pub fn czero() -> CRat {
    Complex::new(Rat::zero(), Rat::zero())
}

pub fn cone() -> CRat {
    Complex::new(Rat::one(), Rat::zero())
}

/// Parses `p/q` or `p` (optional leading sign, ASCII digits only).
pub fn parse_rat(s: &str) -> Result<Rat, ScalarError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ScalarError::Empty);
    }
    let (num_str, den_str) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (s, None),
    };
    let num: BigInt = num_str
        .parse()
        .map_err(|_| ScalarError::Invalid(s.to_string()))?;
    let den: BigInt = match den_str {
        Some(d) => d.parse().map_err(|_| ScalarError::Invalid(s.to_string()))?,
        None => BigInt::one(),
    };
    if den.is_zero() {
        return Err(ScalarError::ZeroDenominator(s.to_string()));
    }
    Ok(Rat::new(num, den))
}

/// Formats a rational in lowest terms, omitting the denominator when 1.
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Renders a complex rational compactly: "a", "bi", or "(a + bi)".
pub fn crat_to_string(z: &CRat) -> String {
    if z.im.is_zero() {
        rat_to_string(&z.re)
    } else if z.re.is_zero() {
        format!("{}i", rat_to_string(&z.im))
    } else {
        let sign = if z.im.is_negative() { "-" } else { "+" };
        format!(
            "({} {} {}i)",
            rat_to_string(&z.re),
            sign,
            rat_to_string(&z.im.abs())
        )
    }
}

/// Conjugates a complex rational.
pub fn conj(z: &CRat) -> CRat {
    Complex::new(z.re.clone(), -z.im.clone())
}

/// Squared modulus |z|^2, an exact nonnegative rational.
pub fn norm_sqr(z: &CRat) -> Rat {
    &z.re * &z.re + &z.im * &z.im
}

/// Converts a rational to the nearest f64 (used only by norm estimation).
pub fn rat_to_f64(r: &Rat) -> f64 {
    num::ToPrimitive::to_f64(r).unwrap_or_else(|| {
        // Extremely large magnitudes: fall back to a quotient of doubles.
        let n = num::ToPrimitive::to_f64(r.numer()).unwrap_or(f64::MAX);
        let d = num::ToPrimitive::to_f64(r.denom()).unwrap_or(f64::MAX);
        n / d
    })
}

/// |r| as a rational.
pub fn rat_abs(r: &Rat) -> Rat {
    r.abs()
}
