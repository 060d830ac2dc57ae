//! Potentials `W^ν`, `W^{ν,sym}` and formal oscillatory integrals against
//! the good basis.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{Element, Grading, HbarSeries, Monomial, PotentialSeries, Psi, Ring, TMonomial, TVar, UMonomial, UNBOUNDED};
use crate::chamber::ChamberIndex;
use crate::error::{Error, Result};
use crate::scalar::{int, ratio, sign, Scalar};
use crate::spin::{gamma_ratio, Cell, MarkingSet, ModelParams};

/// Residue label `(a, b)` of an integration cycle. Labels with `a ≤ r−2` and
/// `b ≤ s−2` form the good basis; the remaining residues are kept as a formal
/// extension so every `u_{J,𝐝}` coefficient has a home.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CycleLabel {
    pub a: u32,
    pub b: u32,
}

impl CycleLabel {
    pub fn new(params: ModelParams, a: u32, b: u32) -> Result<Self> {
        if a >= params.r || b >= params.s {
            return Err(Error::InvalidParams(format!("cycle ({a},{b}) outside 0..{} x 0..{}", params.r - 1, params.s - 1)));
        }
        Ok(Self { a, b })
    }

    pub fn is_good_basis(&self, params: ModelParams) -> bool {
        self.a + 2 <= params.r && self.b + 2 <= params.s
    }

    /// Every residue label `0..r−1 × 0..s−1`.
    pub fn all(params: ModelParams) -> Vec<Self> {
        (0..params.r).flat_map(|a| (0..params.s).map(move |b| Self { a, b })).collect()
    }
}

impl fmt::Display for CycleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

/// Largest `m(J,𝐝)` over the domain of `ν`.
pub fn weight_bound<S: Scalar>(nu: &ChamberIndex<S>) -> Result<u64> {
    let mut best = nu.params().rs();
    for cell in nu.cells() {
        best = best.max(nu.profile(&cell)?.m);
    }
    Ok(best as u64)
}

pub(crate) fn u_monomial(cell: &Cell) -> Monomial {
    Monomial::U(UMonomial::from_pairs(cell.entries().iter().copied()).expect("cell labels are distinct"))
}

/// `W^ν = Σ (−1)^{|J|−1} ν_{J,𝐝,p} u_{J,𝐝} x^{k1} y^{k2}` over `A_I`.
pub fn build_potential<S: Scalar>(nu: &ChamberIndex<S>) -> Result<PotentialSeries<S>> {
    let params = nu.params();
    let ring = Ring::open(nu.markings().twists().keys().copied());
    let mut w = PotentialSeries::zero(&ring, Grading::fermat(params.r, params.s), weight_bound(nu)?);
    for (key, v) in nu.values() {
        let (k1, k2) = nu.markings().balanced_exponent(key)?;
        let c = v.clone() * sign::<S>(key.cell.len() as i64 - 1);
        w.add_term(k1, k2, &Element::monomial(&ring, u_monomial(&key.cell), c)?);
    }
    Ok(w)
}

/// Rings and `ψ_I` for the symmetric potential of a marking set; fails when a
/// marking has no symmetric variable.
pub fn psi_for(markings: &MarkingSet) -> Result<Psi> {
    let params = markings.params();
    for (&l, &(a, b)) in markings.twists() {
        if a + 2 > params.r || b + 2 > params.s {
            return Err(Error::NotSymmetric(format!(
                "marking {l} has twist ({a},{b}); symmetric variables need a <= {}, b <= {}",
                params.r - 2,
                params.s - 2
            )));
        }
    }
    Ok(Psi::new(params.r, params.s, markings.twists()))
}

/// `W^{ν,sym} = Σ_A (−1)^{|A|−1} ν_A t_A x^{k1} y^{k2} / |Aut(A)|` over `A_{I,sym}`.
pub fn build_potential_sym<S: Scalar>(nu: &ChamberIndex<S>) -> Result<(PotentialSeries<S>, Psi)> {
    if !nu.is_symmetric() {
        return Err(Error::NotSymmetric("values differ across a twist-preserving relabeling".into()));
    }
    let psi = psi_for(nu.markings())?;
    let ring = psi.sym_ring().clone();
    let params = nu.params();
    let mut w = PotentialSeries::zero(&ring, Grading::fermat(params.r, params.s), weight_bound(nu)?);
    let mut seen = std::collections::BTreeSet::new();
    for (key, v) in nu.values() {
        let vars: Vec<TVar> = key
            .cell
            .entries()
            .iter()
            .map(|&(l, d)| {
                let (alpha, beta) = nu.markings().twist(l).expect("domain label");
                TVar { alpha, beta, d }
            })
            .collect();
        let t = TMonomial::from_vars(vars);
        if !seen.insert((t.clone(), key.p)) {
            continue;
        }
        let (k1, k2) = nu.markings().balanced_exponent(key)?;
        let c = v.clone() * sign::<S>(key.cell.len() as i64 - 1) / int::<S>(t.automorphisms() as i64);
        w.add_term(k1, k2, &Element::monomial(&ring, Monomial::T(t), c)?);
    }
    Ok((w, psi))
}

/// `∫ x^{m1} y^{m2} e^{(x^r+y^s)/ħ}` over the cycle: `None` when the residues
/// differ, else `(n1+n2, (−1)^{n1+n2} Γ-ratios)` meaning that multiple of
/// `ħ^{n1+n2}`.
pub fn reduce_monomial<S: Scalar>(params: ModelParams, m1: u32, m2: u32, cycle: CycleLabel) -> Option<(i64, S)> {
    let (r, s) = (params.r, params.s);
    if m1 % r != cycle.a || m2 % s != cycle.b {
        return None;
    }
    let n1 = (m1 - cycle.a) / r;
    let n2 = (m2 - cycle.b) / s;
    let e = n1 as i64 + n2 as i64;
    let f = sign::<S>(e)
        * gamma_ratio(&ratio::<S>(cycle.a as i64 + 1, r as i64), n1)
        * gamma_ratio(&ratio::<S>(cycle.b as i64 + 1, s as i64), n2);
    Some((e, f))
}

/// `W − x^r − y^s`, checking that the remainder lies in `𝔪·A[[x,y]]`.
fn perturbation<S: Scalar>(params: ModelParams, w: &PotentialSeries<S>) -> Result<PotentialSeries<S>> {
    let expected: BTreeMap<(u32, u32), S> = BTreeMap::from([((params.r, 0), S::one()), ((0, params.s), S::one())]);
    let red = w.reduction();
    if red != expected {
        let shown: Vec<String> = red.iter().map(|((a, b), c)| format!("{c}*x^{a}y^{b}")).collect();
        return Err(Error::NotAPerturbation(format!("reduction is {}", shown.join(" + "))));
    }
    Ok(w.maximal_part().with_bound(UNBOUNDED))
}

/// Terms `P^h / h!` of `exp(P/ħ)` for `h = 0..=nilpotency`; the `ħ^{−h}` is
/// implicit in the index.
fn exponential_terms<S: Scalar>(params: ModelParams, w: &PotentialSeries<S>) -> Result<Vec<PotentialSeries<S>>> {
    let p = perturbation(params, w)?;
    let ring = w.ring().clone();
    let mut out = vec![PotentialSeries::monomial(&ring, w.grading(), UNBOUNDED, 0, 0, Element::one(&ring))];
    for h in 1..=ring.nilpotency() {
        let next = out[h as usize - 1].try_mul(&p)?.scale(&ratio::<S>(1, h as i64));
        if next.is_zero() {
            break;
        }
        out.push(next);
    }
    Ok(out)
}

fn integrate_terms<S: Scalar>(
    params: ModelParams,
    ring: &Arc<Ring>,
    terms: &[PotentialSeries<S>],
    cycle: CycleLabel,
) -> HbarSeries<S> {
    let mut out = HbarSeries::zero(ring);
    for (h, series) in terms.iter().enumerate() {
        for (&(m1, m2), c) in series.terms() {
            if let Some((e, f)) = reduce_monomial::<S>(params, m1, m2, cycle) {
                out.add_term(e - h as i64, &c.scale(&f));
            }
        }
    }
    out
}

/// `∫ e^{W/ħ}` over the cycle as a Laurent polynomial in `ħ`.
pub fn period_integral<S: Scalar>(params: ModelParams, w: &PotentialSeries<S>, cycle: CycleLabel) -> Result<HbarSeries<S>> {
    let terms = exponential_terms(params, w)?;
    Ok(integrate_terms(params, w.ring(), &terms, cycle))
}

/// Period integrals over every residue label, sharing one expansion.
pub fn period_table<S: Scalar>(params: ModelParams, w: &PotentialSeries<S>) -> Result<BTreeMap<CycleLabel, HbarSeries<S>>> {
    let terms = exponential_terms(params, w)?;
    let ring = w.ring().clone();
    Ok(CycleLabel::all(params)
        .into_par_iter()
        .map(|c| (c, integrate_terms(params, &ring, &terms, c)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect())
}

/// Reads `𝒜(J,𝐝)` off the period integrals: the `u_{J,𝐝}` coefficient must be
/// `(−1)^{|J|} (−ħ)^{−d(J,𝐝)−2} 𝒜` at cycle `(r(J), s(J))` and absent elsewhere.
pub fn extract_amplitudes<S: Scalar>(
    markings: &MarkingSet,
    dmax: &BTreeMap<u32, u32>,
    table: &BTreeMap<CycleLabel, HbarSeries<S>>,
) -> Result<BTreeMap<Cell, S>> {
    let mut out = BTreeMap::new();
    for cell in markings.cells(dmax) {
        if cell.is_empty() {
            continue;
        }
        let prof = markings.profile(&cell)?;
        let mono = u_monomial(&cell);
        let home = CycleLabel { a: prof.r_j, b: prof.s_j };
        let exponent = -prof.d_j - 2;
        let mut value = S::zero();
        for (cycle, series) in table {
            for (e, c) in series.terms() {
                let coeff = c.coefficient(&mono);
                if coeff.is_zero() {
                    continue;
                }
                if *cycle != home || e != exponent {
                    return Err(Error::NonconformingSeries(format!(
                        "u coefficient of {cell} at cycle {cycle}, hbar^{e}; expected only cycle {home}, hbar^{exponent}"
                    )));
                }
                value = coeff * sign::<S>(cell.len() as i64 + exponent);
            }
        }
        if !table.contains_key(&home) {
            return Err(Error::NonconformingSeries(format!("cycle {home} missing from the table")));
        }
        out.insert(cell, value);
    }
    Ok(out)
}

/// Outcome of the flat-coordinate check at one good-basis cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatHead {
    pub cycle: CycleLabel,
    pub holds: bool,
    pub detail: String,
}

/// Checks `∫ = δ_{a,0}δ_{b,0} + t_{a,b,0} ħ^{−1} + O(ħ^{−2})` modulo the
/// variables with positive descendent, for a symmetric-ring series.
pub fn flat_head<S: Scalar>(series: &HbarSeries<S>, cycle: CycleLabel) -> FlatHead {
    let ring = series.ring().clone();
    let keep = |m: &Monomial| !m.as_t().is_some_and(|t| t.has_positive_descendent());
    let mut problems = Vec::new();
    for (e, c) in series.terms() {
        let c = c.filter(keep);
        if c.is_zero() {
            continue;
        }
        let expected = match e {
            0 if cycle.a == 0 && cycle.b == 0 => Some(Element::one(&ring)),
            0 => Some(Element::zero(&ring)),
            -1 => Element::t(&ring, cycle.a, cycle.b, 0).ok().or_else(|| Some(Element::zero(&ring))),
            e if e > 0 => Some(Element::zero(&ring)),
            _ => None,
        };
        if let Some(exp) = expected {
            if c != exp {
                problems.push(format!("hbar^{e}: {c} (expected {exp})"));
            }
        }
    }
    let has = |e: i64| series.terms().any(|(x, c)| x == e && !c.filter(keep).is_zero());
    if cycle.a == 0 && cycle.b == 0 && !has(0) {
        problems.push("hbar^0: missing constant 1".into());
    }
    if Element::<S>::t(&ring, cycle.a, cycle.b, 0).is_ok() && !has(-1) {
        problems.push(format!("hbar^-1: missing t[{},{},0]", cycle.a, cycle.b));
    }
    FlatHead { cycle, holds: problems.is_empty(), detail: problems.join("; ") }
}
