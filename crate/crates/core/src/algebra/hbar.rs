use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::ring::{Element, Ring};
use crate::error::Result;
use crate::scalar::Scalar;

/// Finite Laurent polynomial in `ħ` with coefficients in a coefficient ring.
#[derive(Clone, Debug)]
pub struct HbarSeries<S> {
    ring: Arc<Ring>,
    terms: BTreeMap<i64, Element<S>>,
}

impl<S: Scalar> PartialEq for HbarSeries<S> {
    fn eq(&self, other: &Self) -> bool {
        *self.ring == *other.ring && self.terms == other.terms
    }
}

impl<S: Scalar> HbarSeries<S> {
    pub fn zero(ring: &Arc<Ring>) -> Self {
        Self { ring: ring.clone(), terms: BTreeMap::new() }
    }

    pub fn ring(&self) -> &Arc<Ring> {
        &self.ring
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `(exponent, coefficient)` pairs in ascending exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &Element<S>)> {
        self.terms.iter().map(|(&e, c)| (e, c))
    }

    pub fn coefficient(&self, exponent: i64) -> Element<S> {
        self.terms.get(&exponent).cloned().unwrap_or_else(|| Element::zero(&self.ring))
    }

    pub fn add_term(&mut self, exponent: i64, c: &Element<S>) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(exponent).or_insert_with(|| Element::zero(&self.ring));
        *entry = &*entry + c;
        if entry.is_zero() {
            self.terms.remove(&exponent);
        }
    }

    pub fn map_elements<F>(&self, target: &Arc<Ring>, f: F) -> Result<Self>
    where
        F: Fn(&Element<S>) -> Result<Element<S>>,
    {
        let mut out = Self::zero(target);
        for (&e, c) in &self.terms {
            out.add_term(e, &f(c)?);
        }
        Ok(out)
    }
}

impl<S: Scalar> fmt::Display for HbarSeries<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(e, c)| format!("[{c}]*hbar^{e}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}
