use std::collections::BTreeMap;
use std::sync::Arc;

use super::monomial::{Monomial, UMonomial};
use super::ring::{Element, Ring};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The homomorphism `ψ_I : A_{I,sym} → A_I`, `t_{α,β,d} ↦ Σ_{tw(i)=(α,β)} u_{i,d}`.
#[derive(Clone, Debug)]
pub struct Psi {
    open: Arc<Ring>,
    sym: Arc<Ring>,
    fibers: BTreeMap<(u32, u32), Vec<u32>>,
}

impl Psi {
    /// Builds both rings from a `label → (a,b)` twist assignment. Only twists
    /// with `a ≤ r−2`, `b ≤ s−2` index `t` variables.
    pub fn new(r: u32, s: u32, twists: &BTreeMap<u32, (u32, u32)>) -> Self {
        let open = Ring::open(twists.keys().copied());
        let mut fibers: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
        for (&label, &(a, b)) in twists {
            if a + 2 <= r && b + 2 <= s {
                fibers.entry((a, b)).or_default().push(label);
            }
        }
        let sym = Ring::sym(fibers.iter().map(|(&f, ls)| (f, ls.len() as u32)).collect());
        Self { open, sym, fibers }
    }

    pub fn open_ring(&self) -> &Arc<Ring> {
        &self.open
    }

    pub fn sym_ring(&self) -> &Arc<Ring> {
        &self.sym
    }

    /// Labels in the fiber of `(α,β)`.
    pub fn fiber(&self, alpha: u32, beta: u32) -> &[u32] {
        self.fibers.get(&(alpha, beta)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn apply<S: Scalar>(&self, e: &Element<S>) -> Result<Element<S>> {
        if **e.ring() != *self.sym {
            return Err(Error::RingMismatch);
        }
        e.evaluate(&self.open, |g| {
            let Monomial::T(t) = g else {
                return Err(Error::RingMismatch);
            };
            let v = t.vars()[0];
            let mut out = Element::zero(&self.open);
            for &label in self.fiber(v.alpha, v.beta) {
                out.add_term(Monomial::U(UMonomial::var(label, v.d)), S::one());
            }
            Ok(out)
        })
    }
}
