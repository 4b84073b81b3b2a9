//! Exact rational numbers used for every distance in the crate.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Arbitrary precision rational.
pub type Q = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid rational literal {0:?} (expected \"p\" or \"p/q\")")]
pub struct ParseRationalError(pub String);

pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn zero() -> Q {
    Q::zero()
}

/// `2^k` for any integer `k`.
pub fn pow2(k: i32) -> Q {
    let base = BigInt::one() << k.unsigned_abs();
    if k >= 0 {
        Q::from_integer(base)
    } else {
        Q::new(BigInt::one(), base)
    }
}

/// Parses `"p"` or `"p/q"` (optional sign on `p`, `q > 0` after normalisation).
pub fn parse_q(s: &str) -> Result<Q, ParseRationalError> {
    let err = || ParseRationalError(s.to_string());
    let t = s.trim();
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| err())?;
    let d: BigInt = d.parse().map_err(|_| err())?;
    if d.is_zero() {
        return Err(err());
    }
    Ok(Q::new(n, d))
}

/// Canonical text form: reduced, positive denominator, `"p"` when integral.
pub fn fmt_q(v: &Q) -> String {
    // BigRational is always kept reduced with a positive denominator.
    v.to_string()
}

pub fn min_q(a: &Q, b: &Q) -> Q {
    if a <= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn is_nonneg(v: &Q) -> bool {
    !v.is_negative()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form() {
        assert_eq!(fmt_q(&parse_q("2/4").unwrap()), "1/2");
        assert_eq!(fmt_q(&parse_q("-3/-6").unwrap()), "1/2");
        assert_eq!(fmt_q(&parse_q("65536").unwrap()), "65536");
        assert_eq!(fmt_q(&parse_q("4/2").unwrap()), "2");
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
        assert!(parse_q("1/2/3").is_err());
    }

    #[test]
    fn powers_of_two() {
        assert_eq!(pow2(3), qi(8));
        assert_eq!(pow2(-2), q(1, 4));
        assert_eq!(pow2(0), qi(1));
    }
}
