//! Scalar abstraction.
//!
//! Every algebraic structure in this crate is generic over a field of
//! coefficients. The exact computations use [`Rational`]; `f64` satisfies the
//! same bounds and is handy for quick numerical sanity checks, but equality
//! based verification is only meaningful over an exact field.

use std::fmt::{Debug, Display};
use std::ops::Neg;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Zero};

/// Arbitrary precision rational numbers, always in lowest terms.
pub type Rational = BigRational;

/// Field of coefficients.
pub trait Scalar:
    Clone + Debug + Display + PartialEq + Num + Neg<Output = Self> + FromPrimitive + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Clone
        + Debug
        + Display
        + PartialEq
        + Num
        + Neg<Output = T>
        + FromPrimitive
        + Send
        + Sync
        + 'static
{
}

/// Embeds an integer.
pub fn int<S: Scalar>(n: i64) -> S {
    S::from_i64(n).expect("integer not representable in scalar type")
}

/// Embeds the fraction `num / den`. Panics when `den == 0`.
pub fn ratio<S: Scalar>(num: i64, den: i64) -> S {
    assert!(den != 0, "zero denominator");
    int::<S>(num) / int::<S>(den)
}

/// `(-1)^e` for any integer exponent.
pub fn sign<S: Scalar>(e: i64) -> S {
    if e.rem_euclid(2) == 0 {
        S::one()
    } else {
        -S::one()
    }
}

/// Canonical text form used by every serialized artifact.
pub trait ScalarText: Scalar {
    fn to_text(&self) -> String;
    fn parse_text(text: &str) -> Option<Self>;
}

impl ScalarText for Rational {
    /// `"p/q"` in lowest terms, or `"p"` when the denominator is one.
    fn to_text(&self) -> String {
        if self.denom() == &BigInt::from(1) {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn parse_text(text: &str) -> Option<Self> {
        let text = text.trim();
        match text.split_once('/') {
            Some((p, q)) => {
                let p = BigInt::from_str(p.trim()).ok()?;
                let q = BigInt::from_str(q.trim()).ok()?;
                if q.is_zero() {
                    return None;
                }
                Some(BigRational::new(p, q))
            }
            None => BigInt::from_str(text).ok().map(BigRational::from_integer),
        }
    }
}

impl ScalarText for f64 {
    fn to_text(&self) -> String {
        format!("{self:?}")
    }

    fn parse_text(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_text_is_lowest_terms() {
        let q: Rational = ratio(6, -4);
        assert_eq!(q.to_text(), "-3/2");
        assert_eq!(int::<Rational>(5).to_text(), "5");
        assert_eq!(Rational::parse_text("-3/2"), Some(q));
        assert_eq!(Rational::parse_text("4/2"), Some(int(2)));
        assert_eq!(Rational::parse_text("1/0"), None);
        assert_eq!(Rational::parse_text("x"), None);
    }

    #[test]
    fn signs() {
        assert_eq!(sign::<Rational>(-3), int(-1));
        assert_eq!(sign::<Rational>(4), int(1));
    }
}
