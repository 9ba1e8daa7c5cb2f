//! Exact rational arithmetic for probabilities.
//!
//! Probability annotations stay rational end-to-end; only logarithms
//! (entropy and lens cost) drop to floating point.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_zero() -> Rat {
    BigRational::zero()
}

pub fn rat_one() -> Rat {
    BigRational::one()
}

/// A probability annotation. Kept in `(0, 1]`; the value 1 only appears
/// transiently while rewriting (the union-identity rule) and is normalized
/// away before any entropy computation.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prob(Rat);

impl Prob {
    pub fn new(r: Rat) -> Result<Prob, String> {
        if r.is_positive() && r <= rat_one() {
            Ok(Prob(r))
        } else {
            Err(format!("probability {} outside (0, 1]", r))
        }
    }

    pub fn from_ratio(num: i64, den: i64) -> Prob {
        Prob::new(rat(num, den)).expect("bad ratio")
    }

    pub fn value(&self) -> &Rat {
        &self.0
    }

    pub fn into_value(self) -> Rat {
        self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    /// 1 - p. Only valid for strict probabilities (p < 1).
    pub fn complement(&self) -> Prob {
        Prob(rat_one() - &self.0)
    }

    pub fn mul(&self, other: &Prob) -> Prob {
        Prob(&self.0 * &other.0)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn log2(&self) -> f64 {
        self.to_f64().log2()
    }

    /// Splits a nested union: given the annotations of `(a |p1 b) |p2 c`,
    /// returns the annotations for `a |q1 (b |q2 c)`.
    pub fn assoc_right(p1: &Prob, p2: &Prob) -> (Prob, Prob) {
        let q1 = p1.mul(p2);
        let denom = rat_one() - q1.value();
        let num = (rat_one() - p1.value()) * p2.value();
        (q1, Prob(num / denom))
    }

    /// Inverse of [`Prob::assoc_right`].
    pub fn assoc_left(q1: &Prob, q2: &Prob) -> (Prob, Prob) {
        // q1 = p1*p2 and q2 = (1-p1)p2 / (1-p1p2), so p2 = q1 + q2(1-q1).
        let p2 = q1.value() + q2.value() * (rat_one() - q1.value());
        let p1 = q1.value() / &p2;
        (Prob(p1), Prob(p2))
    }
}

impl fmt::Debug for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Parses `a/b`, an integer, or a decimal like `0.8` / `.8`.
pub fn parse_rat(text: &str) -> Option<Rat> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        let int_part: BigInt = if int.is_empty() { BigInt::zero() } else { int.parse().ok()? };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let num: BigInt = frac.parse().ok()?;
        let den = BigInt::from(10u32).pow(frac.len() as u32);
        return Some(BigRational::from(int_part) + BigRational::new(num, den));
    }
    let n: BigInt = text.parse().ok()?;
    Some(BigRational::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rat("4/5").unwrap(), rat(4, 5));
        assert_eq!(parse_rat("0.8").unwrap(), rat(4, 5));
        assert_eq!(parse_rat(".8").unwrap(), rat(4, 5));
        assert_eq!(parse_rat("1").unwrap(), rat_one());
        assert!(parse_rat("1/0").is_none());
        assert!(parse_rat("x").is_none());
    }

    #[test]
    fn assoc_round_trip() {
        let p1 = Prob::from_ratio(1, 3);
        let p2 = Prob::from_ratio(2, 5);
        let (q1, q2) = Prob::assoc_right(&p1, &p2);
        let (r1, r2) = Prob::assoc_left(&q1, &q2);
        assert_eq!(r1, p1);
        assert_eq!(r2, p2);
    }

    #[test]
    fn prob_bounds() {
        assert!(Prob::new(rat(0, 1)).is_err());
        assert!(Prob::new(rat(6, 5)).is_err());
        assert!(Prob::new(rat(1, 1)).is_ok());
    }
}
