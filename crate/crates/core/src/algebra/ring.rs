use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use super::monomial::{Monomial, TMonomial, TVar, UMonomial};
use crate::error::{Error, Result};
use crate::scalar::{Scalar, ScalarText};

/// Coefficient ring tag together with the marking context that fixes its
/// relations.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Ring {
    /// `A_I = Q[u_{i,d}] / (u_{i,d} u_{i,d'})`.
    Open { labels: BTreeSet<u32> },
    /// `A_{I,sym}`: a `t` monomial vanishes once a fiber `(α,β)` holds more
    /// factors than there are labels of that twist.
    Sym { fibers: BTreeMap<(u32, u32), u32> },
}

impl Ring {
    pub fn open<I: IntoIterator<Item = u32>>(labels: I) -> Arc<Ring> {
        Arc::new(Ring::Open { labels: labels.into_iter().collect() })
    }

    pub fn sym(fibers: BTreeMap<(u32, u32), u32>) -> Arc<Ring> {
        Arc::new(Ring::Sym { fibers: fibers.into_iter().filter(|&(_, n)| n > 0).collect() })
    }

    /// Nilpotency index bound: `𝔪^{n+1} = 0` for the returned `n`.
    pub fn nilpotency(&self) -> u32 {
        match self {
            Ring::Open { labels } => labels.len() as u32,
            Ring::Sym { fibers } => fibers.values().sum(),
        }
    }

    fn admits(&self, m: &Monomial) -> bool {
        match (self, m) {
            (Ring::Open { labels }, Monomial::U(u)) => u.labels().all(|l| labels.contains(&l)),
            (Ring::Sym { fibers }, Monomial::T(t)) => t
                .fiber_counts()
                .iter()
                .all(|(f, n)| fibers.get(f).is_some_and(|bound| n <= bound)),
            _ => false,
        }
    }

    fn unit(&self) -> Monomial {
        match self {
            Ring::Open { .. } => Monomial::U(UMonomial::one()),
            Ring::Sym { .. } => Monomial::T(TMonomial::one()),
        }
    }

    /// Product of monomials with the relations applied; `None` means zero.
    pub fn mul_monomials(&self, a: &Monomial, b: &Monomial) -> Option<Monomial> {
        match (self, a, b) {
            (Ring::Open { .. }, Monomial::U(x), Monomial::U(y)) => x.mul(y).map(Monomial::U),
            (Ring::Sym { fibers }, Monomial::T(x), Monomial::T(y)) => {
                let p = x.mul(y);
                let ok = p.fiber_counts().iter().all(|(f, n)| fibers.get(f).is_some_and(|bound| n <= bound));
                ok.then_some(Monomial::T(p))
            }
            _ => None,
        }
    }
}

fn same_ring(a: &Arc<Ring>, b: &Arc<Ring>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Element of `A_I` or `A_{I,sym}`: sparse map monomial → coefficient, with no
/// stored zeros.
#[derive(Clone, Debug)]
pub struct Element<S> {
    ring: Arc<Ring>,
    terms: BTreeMap<Monomial, S>,
}

impl<S: Scalar> PartialEq for Element<S> {
    fn eq(&self, other: &Self) -> bool {
        same_ring(&self.ring, &other.ring) && self.terms == other.terms
    }
}

impl<S: Scalar> Element<S> {
    pub fn zero(ring: &Arc<Ring>) -> Self {
        Self { ring: ring.clone(), terms: BTreeMap::new() }
    }

    pub fn constant(ring: &Arc<Ring>, c: S) -> Self {
        let mut e = Self::zero(ring);
        e.add_term(ring.unit(), c);
        e
    }

    pub fn one(ring: &Arc<Ring>) -> Self {
        Self::constant(ring, S::one())
    }

    /// `c · m`; fails when `m` is not a monomial of the ring.
    pub fn monomial(ring: &Arc<Ring>, m: Monomial, c: S) -> Result<Self> {
        if !ring.admits(&m) {
            return Err(Error::InvalidVariable(m.to_string()));
        }
        let mut e = Self::zero(ring);
        e.add_term(m, c);
        Ok(e)
    }

    /// The generator `u_{label,d}` of `A_I`.
    pub fn u(ring: &Arc<Ring>, label: u32, d: u32) -> Result<Self> {
        Self::monomial(ring, Monomial::U(UMonomial::var(label, d)), S::one())
    }

    /// The generator `t_{α,β,d}` of `A_{I,sym}`.
    pub fn t(ring: &Arc<Ring>, alpha: u32, beta: u32, d: u32) -> Result<Self> {
        Self::monomial(ring, Monomial::T(TMonomial::var(alpha, beta, d)), S::one())
    }

    pub fn ring(&self) -> &Arc<Ring> {
        &self.ring
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &S)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> S {
        self.terms.get(m).cloned().unwrap_or_else(S::zero)
    }

    /// Coefficient of the unit monomial.
    pub fn constant_term(&self) -> S {
        self.coefficient(&self.ring.unit())
    }

    /// Part lying in the maximal ideal.
    pub fn maximal_part(&self) -> Self {
        Self {
            ring: self.ring.clone(),
            terms: self.terms.iter().filter(|(m, _)| !m.is_one()).map(|(m, c)| (m.clone(), c.clone())).collect(),
        }
    }

    /// Adds `c · m` in place, keeping the no-zero invariant. Monomials outside
    /// the ring are treated as zero.
    pub fn add_term(&mut self, m: Monomial, c: S) {
        if c.is_zero() || !self.ring.admits(&m) {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().clone() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if !same_ring(&self.ring, &other.ring) {
            return Err(Error::RingMismatch);
        }
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&-other.clone())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        if !same_ring(&self.ring, &other.ring) {
            return Err(Error::RingMismatch);
        }
        let mut out = Self::zero(&self.ring);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if let Some(m) = self.ring.mul_monomials(ma, mb) {
                    out.add_term(m, ca.clone() * cb.clone());
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &S) -> Self {
        if c.is_zero() {
            return Self::zero(&self.ring);
        }
        Self {
            ring: self.ring.clone(),
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v.clone() * c.clone())).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one(&self.ring);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Exponential of a nilpotent element: `Σ_{n ≤ nilpotency} e^n / n!`.
    /// Fails when the element has a nonzero constant term.
    pub fn exp_nilpotent(&self) -> Result<Self> {
        if !self.constant_term().is_zero() {
            return Err(Error::InvalidVariable("exponential argument must lie in the maximal ideal".into()));
        }
        let mut acc = Self::one(&self.ring);
        let mut power = Self::one(&self.ring);
        let mut fact = S::one();
        for n in 1..=self.ring.nilpotency() {
            power = &power * self;
            if power.is_zero() {
                break;
            }
            fact = fact * crate::scalar::int::<S>(n as i64);
            acc = &acc + &power.scale(&(S::one() / fact.clone()));
        }
        Ok(acc)
    }

    /// Applies `f` to every coefficient, dropping those that become zero.
    pub fn map_coefficients<F: Fn(&S) -> S>(&self, f: F) -> Self {
        let mut out = Self::zero(&self.ring);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    /// Keeps only the terms whose monomial satisfies `keep`.
    pub fn filter<F: Fn(&Monomial) -> bool>(&self, keep: F) -> Self {
        Self {
            ring: self.ring.clone(),
            terms: self.terms.iter().filter(|(m, _)| keep(m)).map(|(m, c)| (m.clone(), c.clone())).collect(),
        }
    }

    /// Substitutes variables: `image` maps each `u` generator (for `A_I`) or
    /// `t` generator (for `A_{I,sym}`) to an element of `target`.
    pub fn evaluate<F>(&self, target: &Arc<Ring>, image: F) -> Result<Element<S>>
    where
        F: Fn(&Monomial) -> Result<Element<S>>,
    {
        let mut out = Element::zero(target);
        for (m, c) in &self.terms {
            let mut prod = Element::constant(target, c.clone());
            let generators: Vec<Monomial> = match m {
                Monomial::U(u) => u.pairs().map(|(l, d)| Monomial::U(UMonomial::var(l, d))).collect(),
                Monomial::T(t) => t.vars().into_iter().map(|v: TVar| Monomial::T(TMonomial::var(v.alpha, v.beta, v.d))).collect(),
            };
            for g in generators {
                prod = prod.try_mul(&image(&g)?)?;
                if prod.is_zero() {
                    break;
                }
            }
            out = out.try_add(&prod)?;
        }
        Ok(out)
    }
}

impl<S: ScalarText> Element<S> {
    /// Canonical `monomial → "p/q"` map for serialization.
    pub fn to_text_map(&self) -> BTreeMap<String, String> {
        self.terms.iter().map(|(m, c)| (m.to_string(), c.to_text())).collect()
    }
}

impl<S: Scalar> fmt::Display for Element<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(m, c)| format!("({c})*{m}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl<S: Scalar> Neg for Element<S> {
    type Output = Element<S>;
    fn neg(self) -> Self::Output {
        Element { ring: self.ring, terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect() }
    }
}

impl<S: Scalar> Add for &Element<S> {
    type Output = Element<S>;
    fn add(self, rhs: Self) -> Self::Output {
        self.try_add(rhs).expect("ring mismatch in addition")
    }
}

impl<S: Scalar> Sub for &Element<S> {
    type Output = Element<S>;
    fn sub(self, rhs: Self) -> Self::Output {
        self.try_sub(rhs).expect("ring mismatch in subtraction")
    }
}

impl<S: Scalar> Mul for &Element<S> {
    type Output = Element<S>;
    fn mul(self, rhs: Self) -> Self::Output {
        self.try_mul(rhs).expect("ring mismatch in multiplication")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ratio, Rational};

    #[test]
    fn open_relations() {
        let ring = Ring::open([1, 2]);
        let a = Element::<Rational>::u(&ring, 1, 0).unwrap();
        let b = Element::<Rational>::u(&ring, 1, 2).unwrap();
        let c = Element::<Rational>::u(&ring, 2, 1).unwrap();
        assert!((&a * &b).is_zero());
        let ac = &a * &c;
        assert_eq!(ac.len(), 1);
        assert_eq!(ac.coefficient(&Monomial::U(UMonomial::from_pairs([(1, 0), (2, 1)]).unwrap())), int(1));
        assert!(Element::<Rational>::u(&ring, 3, 0).is_err());
    }

    #[test]
    fn sym_fiber_truncation() {
        let ring = Ring::sym(BTreeMap::from([((1, 1), 2)]));
        let t = Element::<Rational>::t(&ring, 1, 1, 0).unwrap();
        let t2 = &t * &t;
        assert!(!t2.is_zero());
        assert!((&t2 * &t).is_zero());
        assert!(Element::<Rational>::t(&ring, 0, 1, 0).is_err());
    }

    #[test]
    fn ring_mismatch_is_reported() {
        let r1 = Ring::open([1]);
        let r2 = Ring::open([1, 2]);
        let a = Element::<Rational>::one(&r1);
        let b = Element::<Rational>::one(&r2);
        assert_eq!(a.try_mul(&b), Err(Error::RingMismatch));
    }

    #[test]
    fn exponential_of_square_zero() {
        let ring = Ring::open([1]);
        let u = Element::<Rational>::u(&ring, 1, 0).unwrap().scale(&ratio(3, 2));
        let e = u.exp_nilpotent().unwrap();
        assert_eq!(e, &Element::one(&ring) + &u);
    }
}
