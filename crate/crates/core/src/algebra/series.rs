use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::ring::{Element, Ring};
use crate::error::{Error, Result};
use crate::scalar::{int, Scalar};

/// Weighted grading `wt(x^{k1} y^{k2}) = s·k1 + r·k2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grading {
    pub x: u32,
    pub y: u32,
}

impl Grading {
    /// Grading attached to `x^r + y^s`: `x` has weight `s`, `y` weight `r`.
    pub fn fermat(r: u32, s: u32) -> Self {
        Self { x: s, y: r }
    }

    pub fn weight(&self, k1: u32, k2: u32) -> u64 {
        self.x as u64 * k1 as u64 + self.y as u64 * k2 as u64
    }
}

/// Bound used when no truncation is wanted.
pub const UNBOUNDED: u64 = u64::MAX;

/// Bivariate series over a coefficient ring, truncated above a weight bound.
#[derive(Clone, Debug)]
pub struct PotentialSeries<S> {
    ring: Arc<Ring>,
    grading: Grading,
    bound: u64,
    terms: BTreeMap<(u32, u32), Element<S>>,
}

impl<S: Scalar> PartialEq for PotentialSeries<S> {
    fn eq(&self, other: &Self) -> bool {
        self.grading == other.grading && *self.ring == *other.ring && self.terms == other.terms
    }
}

impl<S: Scalar> PotentialSeries<S> {
    pub fn zero(ring: &Arc<Ring>, grading: Grading, bound: u64) -> Self {
        Self { ring: ring.clone(), grading, bound, terms: BTreeMap::new() }
    }

    /// `coefficient · x^{k1} y^{k2}`.
    pub fn monomial(ring: &Arc<Ring>, grading: Grading, bound: u64, k1: u32, k2: u32, coefficient: Element<S>) -> Self {
        let mut out = Self::zero(ring, grading, bound);
        out.add_term(k1, k2, &coefficient);
        out
    }

    pub fn x(ring: &Arc<Ring>, grading: Grading, bound: u64) -> Self {
        Self::monomial(ring, grading, bound, 1, 0, Element::one(ring))
    }

    pub fn y(ring: &Arc<Ring>, grading: Grading, bound: u64) -> Self {
        Self::monomial(ring, grading, bound, 0, 1, Element::one(ring))
    }

    pub fn ring(&self) -> &Arc<Ring> {
        &self.ring
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &Element<S>)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, k1: u32, k2: u32) -> Element<S> {
        self.terms.get(&(k1, k2)).cloned().unwrap_or_else(|| Element::zero(&self.ring))
    }

    /// Adds `c · x^{k1} y^{k2}` unless its weight exceeds the bound.
    pub fn add_term(&mut self, k1: u32, k2: u32, c: &Element<S>) {
        if c.is_zero() || self.grading.weight(k1, k2) > self.bound {
            return;
        }
        assert!(**c.ring() == *self.ring, "coefficient ring differs from series ring");
        let entry = self.terms.entry((k1, k2)).or_insert_with(|| Element::zero(&self.ring));
        *entry = &*entry + c;
        if entry.is_zero() {
            self.terms.remove(&(k1, k2));
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if *self.ring != *other.ring || self.grading != other.grading {
            return Err(Error::RingMismatch);
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.bound = self.bound.min(other.bound);
        out = out.weighted_truncate(out.bound);
        for (&(k1, k2), c) in &other.terms {
            out.add_term(k1, k2, c);
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(&-S::one())
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = Self::zero(&self.ring, self.grading, self.bound);
        for (&(k1, k2), e) in &self.terms {
            out.add_term(k1, k2, &e.scale(c));
        }
        out
    }

    /// Multiplies every coefficient by a ring element.
    pub fn mul_element(&self, e: &Element<S>) -> Result<Self> {
        let mut out = Self::zero(&self.ring, self.grading, self.bound);
        for (&(k1, k2), c) in &self.terms {
            out.add_term(k1, k2, &c.try_mul(e)?);
        }
        Ok(out)
    }

    /// Product truncated at the smaller of the two bounds.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let bound = self.bound.min(other.bound);
        let mut out = Self::zero(&self.ring, self.grading, bound);
        for (&(a1, a2), ca) in &self.terms {
            let wa = self.grading.weight(a1, a2);
            if wa > bound {
                continue;
            }
            for (&(b1, b2), cb) in &other.terms {
                if wa + other.grading.weight(b1, b2) > bound {
                    continue;
                }
                let c = ca.try_mul(cb)?;
                out.add_term(a1 + b1, a2 + b2, &c);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, n: u32) -> Result<Self> {
        let mut acc = Self::monomial(&self.ring, self.grading, self.bound, 0, 0, Element::one(&self.ring));
        for _ in 0..n {
            acc = acc.try_mul(self)?;
        }
        Ok(acc)
    }

    /// Drops every term of weight above `bound` and lowers the stored bound.
    pub fn weighted_truncate(&self, bound: u64) -> Self {
        let bound = bound.min(self.bound);
        let mut out = Self::zero(&self.ring, self.grading, bound);
        for (&(k1, k2), c) in &self.terms {
            out.add_term(k1, k2, c);
        }
        out
    }

    /// Same terms with a different stored bound; raising it never invents terms.
    pub fn with_bound(&self, bound: u64) -> Self {
        let mut out = self.weighted_truncate(bound);
        out.bound = bound;
        out
    }

    pub fn dx(&self) -> Self {
        let mut out = Self::zero(&self.ring, self.grading, self.bound);
        for (&(k1, k2), c) in &self.terms {
            if k1 > 0 {
                out.add_term(k1 - 1, k2, &c.scale(&int(k1 as i64)));
            }
        }
        out
    }

    pub fn dy(&self) -> Self {
        let mut out = Self::zero(&self.ring, self.grading, self.bound);
        for (&(k1, k2), c) in &self.terms {
            if k2 > 0 {
                out.add_term(k1, k2 - 1, &c.scale(&int(k2 as i64)));
            }
        }
        out
    }

    /// Part of the series with unit-monomial coefficients, as plain scalars.
    pub fn reduction(&self) -> BTreeMap<(u32, u32), S> {
        self.terms
            .iter()
            .filter_map(|(&k, c)| {
                let v = c.constant_term();
                (!v.is_zero()).then_some((k, v))
            })
            .collect()
    }

    /// Part of the series with coefficients in the maximal ideal.
    pub fn maximal_part(&self) -> Self {
        let mut out = Self::zero(&self.ring, self.grading, self.bound);
        for (&(k1, k2), c) in &self.terms {
            out.add_term(k1, k2, &c.maximal_part());
        }
        out
    }

    /// Composition `f(x_image, y_image)`, truncated to this series' bound.
    /// Both images must reduce to `x` and `y` modulo the maximal ideal.
    pub fn substitute(&self, x_image: &Self, y_image: &Self) -> Result<Self> {
        self.check_compatible(x_image)?;
        self.check_compatible(y_image)?;
        let one = Element::<S>::one(&self.ring);
        let expect_x = BTreeMap::from([((1, 0), one.constant_term())]);
        let expect_y = BTreeMap::from([((0, 1), one.constant_term())]);
        if x_image.reduction() != expect_x {
            return Err(Error::ImageNotCongruent("x"));
        }
        if y_image.reduction() != expect_y {
            return Err(Error::ImageNotCongruent("y"));
        }
        let bound = self.bound;
        let xi = x_image.with_bound(bound);
        let yi = y_image.with_bound(bound);
        let max1 = self.terms.keys().map(|k| k.0).max().unwrap_or(0);
        let max2 = self.terms.keys().map(|k| k.1).max().unwrap_or(0);
        let unit = Self::monomial(&self.ring, self.grading, bound, 0, 0, one);
        let mut xp = vec![unit.clone()];
        for k in 1..=max1 as usize {
            let next = xp[k - 1].try_mul(&xi)?;
            xp.push(next);
        }
        let mut yp = vec![unit];
        for k in 1..=max2 as usize {
            let next = yp[k - 1].try_mul(&yi)?;
            yp.push(next);
        }
        let mut out = Self::zero(&self.ring, self.grading, bound);
        for (&(k1, k2), c) in &self.terms {
            let term = xp[k1 as usize].try_mul(&yp[k2 as usize])?.mul_element(c)?;
            out = out.try_add(&term)?;
        }
        Ok(out)
    }

    /// Rewrites every coefficient through `f` into the ring `target`.
    pub fn map_elements<F>(&self, target: &Arc<Ring>, f: F) -> Result<Self>
    where
        F: Fn(&Element<S>) -> Result<Element<S>>,
    {
        let mut out = Self::zero(target, self.grading, self.bound);
        for (&(k1, k2), c) in &self.terms {
            out.add_term(k1, k2, &f(c)?);
        }
        Ok(out)
    }
}

impl<S: Scalar> fmt::Display for PotentialSeries<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|((a, b), c)| format!("[{c}]*x^{a}*y^{b}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn setup() -> (Arc<Ring>, Grading) {
        (Ring::open([1]), Grading::fermat(3, 3))
    }

    #[test]
    fn substitution_with_square_zero_coefficient() {
        let (ring, g) = setup();
        let c: Rational = int(5);
        let u = Element::<Rational>::u(&ring, 1, 0).unwrap();
        let bound = 30;
        let x = PotentialSeries::x(&ring, g, bound);
        let y = PotentialSeries::y(&ring, g, bound);
        let xi = x.try_add(&PotentialSeries::monomial(&ring, g, bound, 2, 1, u.scale(&(int::<Rational>(2) * c.clone())))).unwrap();
        let x3 = x.pow(3).unwrap();
        let out = x3.substitute(&xi, &y).unwrap();
        let expected = x3
            .try_add(&PotentialSeries::monomial(&ring, g, bound, 4, 1, u.scale(&(int::<Rational>(6) * c.clone()))))
            .unwrap();
        assert_eq!(out, expected);

        let yi = y.try_sub(&PotentialSeries::monomial(&ring, g, bound, 1, 2, u.scale(&(int::<Rational>(2) * c.clone())))).unwrap();
        let y3 = y.pow(3).unwrap();
        let expected = y3
            .try_sub(&PotentialSeries::monomial(&ring, g, bound, 1, 4, u.scale(&(int::<Rational>(6) * c))))
            .unwrap();
        assert_eq!(y3.substitute(&x, &yi).unwrap(), expected);
        assert_eq!(y3.substitute(&x, &y).unwrap(), y3);
    }

    #[test]
    fn substitution_rejects_non_congruent_image() {
        let (ring, g) = setup();
        let x = PotentialSeries::<Rational>::x(&ring, g, 20);
        let y = PotentialSeries::y(&ring, g, 20);
        let bad = x.scale(&int(2));
        assert_eq!(x.substitute(&bad, &y), Err(Error::ImageNotCongruent("x")));
    }

    #[test]
    fn truncation() {
        let (ring, g) = setup();
        let one = Element::<Rational>::one(&ring);
        let mut s = PotentialSeries::zero(&ring, g, UNBOUNDED);
        s.add_term(1, 4, &one);
        s.add_term(4, 4, &one);
        s.add_term(0, 0, &one);
        let t = s.weighted_truncate(15);
        assert_eq!(t.terms().count(), 2);
        assert_eq!(t.weighted_truncate(15), t);
        assert_eq!(s.weighted_truncate(0).terms().map(|(k, _)| *k).collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn derivatives() {
        let (ring, g) = setup();
        let one = Element::<Rational>::one(&ring);
        let s = PotentialSeries::monomial(&ring, g, 40, 3, 2, one.clone());
        assert_eq!(s.dx(), PotentialSeries::monomial(&ring, g, 40, 2, 2, one.scale(&int(3))));
        assert_eq!(s.dy(), PotentialSeries::monomial(&ring, g, 40, 3, 1, one.scale(&int(2))));
    }
}
