//! The wall-crossing group: generators indexed by critical graphs, their
//! exponential action on potentials and chamber indices, and the solver that
//! connects two chamber indices.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Element, Grading, Monomial, PotentialSeries, Ring, UNBOUNDED};
use crate::bmodel::{build_potential, u_monomial};
use crate::chamber::ChamberIndex;
use crate::error::{Error, Result};
use crate::scalar::{int, ratio, sign, Scalar, ScalarText};
use crate::spin::{BalancedKey, Cell, CriticalKey, MarkingSet};

/// `v = c · u_{J,𝐝} · x^{k1} y^{k2} ((k2+1) x∂x − (k1+1) y∂y)` where
/// `(k1+1, k2+1)` are the exponents of the critical graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorField<S> {
    key: CriticalKey,
    c: S,
    k1: u32,
    k2: u32,
}

impl<S: Scalar> GeneratorField<S> {
    pub fn key(&self) -> &CriticalKey {
        &self.key
    }

    pub fn coefficient(&self) -> &S {
        &self.c
    }

    pub fn exponents(&self) -> (u32, u32) {
        (self.k1, self.k2)
    }

    /// The field as a vector field over `A_I`.
    pub fn field(&self, ring: &Arc<Ring>) -> Result<VectorField<S>> {
        Ok(VectorField { coeff: Element::monomial(ring, u_monomial(&self.key.cell), self.c.clone())?, k1: self.k1, k2: self.k2 })
    }
}

/// Validates a critical key and attaches a coefficient.
pub fn make_generator<S: Scalar>(markings: &MarkingSet, key: CriticalKey, c: S) -> Result<GeneratorField<S>> {
    if key.p == 0 {
        return Err(Error::InvalidCriticalKey("critical graphs start at p = 1".into()));
    }
    if key.cell.is_empty() {
        return Err(Error::InvalidCriticalKey("generators need a non-empty J".into()));
    }
    let (e1, e2) = markings.critical_exponent(&key)?;
    let (k1, k2) = (e1 - 1, e2 - 1);
    let prof = markings.profile(&key.cell)?;
    let params = markings.params();
    let weight = params.s as i64 * k1 as i64 + params.r as i64 * k2 as i64;
    if weight != prof.m - params.rs() || k1 % params.r != prof.r_j || k2 % params.s != prof.s_j {
        return Err(Error::Internal(format!("critical exponents ({k1},{k2}) fail the membership identities on {}", key.cell)));
    }
    Ok(GeneratorField { key, c, k1, k2 })
}

/// `coeff · x^{k1} y^{k2} ((k2+1) x∂x − (k1+1) y∂y)` with an arbitrary
/// coefficient in the maximal ideal.
#[derive(Clone, Debug)]
pub struct VectorField<S> {
    pub coeff: Element<S>,
    pub k1: u32,
    pub k2: u32,
}

impl<S: Scalar> VectorField<S> {
    /// `v(f)`.
    pub fn apply(&self, f: &PotentialSeries<S>) -> Result<PotentialSeries<S>> {
        let ring = f.ring();
        let (g, b) = (f.grading(), f.bound());
        let x = PotentialSeries::x(ring, g, b);
        let y = PotentialSeries::y(ring, g, b);
        let lead = PotentialSeries::monomial(ring, g, b, self.k1, self.k2, self.coeff.clone());
        let xf = x.try_mul(&f.dx())?.scale(&int(self.k2 as i64 + 1));
        let yf = y.try_mul(&f.dy())?.scale(&int(self.k1 as i64 + 1));
        lead.try_mul(&xf.try_sub(&yf)?)
    }

    /// `exp(v)(f) = Σ v^n(f)/n!`; terminates because the coefficient is
    /// nilpotent.
    pub fn exp_apply(&self, f: &PotentialSeries<S>) -> Result<PotentialSeries<S>> {
        if !self.coeff.constant_term().is_zero() {
            return Err(Error::InvalidVariable("field coefficient must lie in the maximal ideal".into()));
        }
        let mut acc = f.clone();
        let mut term = f.clone();
        let limit = f.ring().nilpotency() + 1;
        for n in 1..=limit {
            term = self.apply(&term)?.scale(&ratio(1, n as i64));
            if term.is_zero() {
                break;
            }
            acc = acc.try_add(&term)?;
        }
        Ok(acc)
    }

    /// `(exp(v)(x), exp(v)(y))`, untruncated.
    pub fn exp_images(&self, ring: &Arc<Ring>, grading: Grading) -> Result<(PotentialSeries<S>, PotentialSeries<S>)> {
        let x = PotentialSeries::x(ring, grading, UNBOUNDED);
        let y = PotentialSeries::y(ring, grading, UNBOUNDED);
        Ok((self.exp_apply(&x)?, self.exp_apply(&y)?))
    }
}

/// `exp(v_n) ∘ … ∘ exp(v_1)`, stored as its factor list.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement<S> {
    pub factors: Vec<GeneratorField<S>>,
}

impl<S: Scalar> Default for GroupElement<S> {
    fn default() -> Self {
        Self { factors: Vec::new() }
    }
}

impl<S: Scalar> GroupElement<S> {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Self) -> Self {
        let mut factors = first.factors.clone();
        factors.extend(self.factors.iter().cloned());
        Self { factors }
    }
}

/// A random product of up to `max_factors` generators over the critical
/// keys of the domain, with coefficients drawn from `{±1/2, ±1, ±2}`.
pub fn random_element<S: Scalar, R: Rng>(
    markings: &MarkingSet,
    dmax: &BTreeMap<u32, u32>,
    max_factors: usize,
    rng: &mut R,
) -> Result<GroupElement<S>> {
    let mut keys = Vec::new();
    for cell in markings.cells(dmax) {
        if !cell.is_empty() {
            keys.extend(markings.critical_keys(&cell)?);
        }
    }
    let mut g = GroupElement::identity();
    if keys.is_empty() || max_factors == 0 {
        return Ok(g);
    }
    let choices: [(i64, i64); 6] = [(1, 2), (-1, 2), (1, 1), (-1, 1), (2, 1), (-2, 1)];
    for _ in 0..rng.gen_range(1..=max_factors) {
        let key = keys[rng.gen_range(0..keys.len())].clone();
        let (n, d) = choices[rng.gen_range(0..choices.len())];
        g.factors.push(make_generator(markings, key, ratio(n, d))?);
    }
    Ok(g)
}

/// How a single factor acts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Strategy {
    /// `exp(v) = Id + v`, valid because the coefficient squares to zero.
    #[default]
    SquareZero,
    /// Finite exponential series and substitution of the images of `x`, `y`.
    Series,
}

/// `g(W)`: factors act in order, the first factor substituted first.
pub fn exp_apply<S: Scalar>(g: &GroupElement<S>, w: &PotentialSeries<S>, strategy: Strategy) -> Result<PotentialSeries<S>> {
    let ring = w.ring().clone();
    if !matches!(*ring, Ring::Open { .. }) {
        return Err(Error::RingMismatch);
    }
    let mut cur = w.clone();
    for factor in &g.factors {
        let v = factor.field(&ring)?;
        cur = match strategy {
            Strategy::SquareZero => cur.try_add(&v.apply(&cur)?)?,
            Strategy::Series => {
                let (xi, yi) = v.exp_images(&ring, w.grading())?;
                cur.substitute(&xi, &yi)?
            }
        };
    }
    Ok(cur)
}

/// Images `(g(x), g(y))` of the coordinates, untruncated.
pub fn images<S: Scalar>(
    g: &GroupElement<S>,
    ring: &Arc<Ring>,
    grading: Grading,
) -> Result<(PotentialSeries<S>, PotentialSeries<S>)> {
    let mut x = PotentialSeries::x(ring, grading, UNBOUNDED);
    let mut y = PotentialSeries::y(ring, grading, UNBOUNDED);
    for factor in &g.factors {
        let (xi, yi) = factor.field(ring)?.exp_images(ring, grading)?;
        x = x.substitute(&xi, &yi)?;
        y = y.substitute(&xi, &yi)?;
    }
    Ok((x, y))
}

/// Whether `g` acts as the identity automorphism.
pub fn is_identity<S: Scalar>(g: &GroupElement<S>, markings: &MarkingSet) -> Result<bool> {
    let params = markings.params();
    let ring = Ring::open(markings.twists().keys().copied());
    let grading = Grading::fermat(params.r, params.s);
    let (x, y) = images(g, &ring, grading)?;
    Ok(x == PotentialSeries::x(&ring, grading, UNBOUNDED) && y == PotentialSeries::y(&ring, grading, UNBOUNDED))
}

/// Reads a chamber index off a potential over `A_I`.
pub fn read_chamber<S: Scalar>(
    w: &PotentialSeries<S>,
    markings: &MarkingSet,
    dmax: &BTreeMap<u32, u32>,
) -> Result<ChamberIndex<S>> {
    let mut values: BTreeMap<BalancedKey, S> = BTreeMap::new();
    let mut slots: BTreeMap<(Cell, (u32, u32)), BalancedKey> = BTreeMap::new();
    for cell in markings.cells(dmax) {
        for key in markings.balanced_keys(&cell)? {
            let exps = markings.balanced_exponent(&key)?;
            slots.insert((cell.clone(), exps), key.clone());
            values.insert(key, S::zero());
        }
    }
    for (&(k1, k2), coeff) in w.terms() {
        for (m, c) in coeff.terms() {
            let Monomial::U(u) = m else {
                return Err(Error::RingMismatch);
            };
            let cell = Cell::new(u.pairs())?;
            let key = slots
                .get(&(cell.clone(), (k1, k2)))
                .ok_or_else(|| Error::StrayMonomial(format!("{m} x^{k1} y^{k2}")))?;
            values.insert(key.clone(), c.clone() * sign::<S>(cell.len() as i64 - 1));
        }
    }
    ChamberIndex::from_values(markings.clone(), dmax.clone(), values)
}

/// `g(ν)`, read off from `g(W^ν)`.
pub fn act_on_chamber<S: Scalar>(g: &GroupElement<S>, nu: &ChamberIndex<S>) -> Result<ChamberIndex<S>> {
    let w = build_potential(nu)?;
    let image = exp_apply(g, &w, Strategy::SquareZero)?;
    read_chamber(&image, nu.markings(), nu.dmax())
}

/// Finds `g` with `g(ν) = ν₂`. Cells are swept by increasing `|J|` (a
/// generator on `J` only moves values on `J` and on strictly larger cells),
/// then by level `m(J,𝐝)`, labels and descendents; within a cell the
/// corrector at `Λ_{J,p+1}` clears the difference at `p`, and the last value
/// must then agree by itself.
pub fn connect<S: Scalar>(nu: &ChamberIndex<S>, target: &ChamberIndex<S>) -> Result<GroupElement<S>> {
    if nu.markings() != target.markings() || nu.dmax() != target.dmax() {
        return Err(Error::OutOfDomain("chamber indices live on different domains".into()));
    }
    for (name, idx) in [("source", nu), ("target", target)] {
        let report = idx.check_axioms();
        if !report.passed() {
            return Err(Error::AxiomViolation(format!("{name}: {}", report.violations[0])));
        }
    }
    let markings = nu.markings();
    let params = markings.params();
    let mut cells: Vec<(usize, i64, Cell)> = Vec::new();
    for cell in nu.cells() {
        if cell.is_empty() {
            continue;
        }
        let prof = markings.profile(&cell)?;
        cells.push((cell.len(), prof.m, cell));
    }
    cells.sort_by(|a, b| (a.0, a.1, a.2.labels().collect::<Vec<_>>(), &a.2).cmp(&(b.0, b.1, b.2.labels().collect::<Vec<_>>(), &b.2)));

    let mut g = GroupElement::identity();
    let mut current = nu.clone();
    let mut layer_start = 0;
    while layer_start < cells.len() {
        let size = cells[layer_start].0;
        let layer_end = cells[layer_start..].iter().position(|c| c.0 != size).map_or(cells.len(), |i| layer_start + i);
        let mut layer = GroupElement::identity();
        for (_, _, cell) in &cells[layer_start..layer_end] {
            let prof = markings.profile(cell)?;
            let keys = markings.balanced_keys(cell)?;
            if keys.len() < 2 {
                continue;
            }
            let mut diff: Vec<S> = Vec::with_capacity(keys.len());
            for k in &keys {
                diff.push(target.value(k)? - current.value(k)?);
            }
            let sgn = sign::<S>(cell.len() as i64);
            for p in 0..keys.len() - 1 {
                if diff[p].is_zero() {
                    continue;
                }
                let k1 = prof.r_j + p as u32 * params.r;
                let c = sgn.clone() * diff[p].clone() / int::<S>(params.s as i64 * (k1 as i64 + 1));
                let generator = make_generator(markings, CriticalKey { cell: cell.clone(), p: p as u32 + 1 }, c.clone())?;
                let (_, k2) = generator.exponents();
                diff[p + 1] = diff[p + 1].clone() - (-sgn.clone()) * int::<S>(params.r as i64 * (k2 as i64 + 1)) * c;
                diff[p] = S::zero();
                layer.factors.push(generator);
            }
        }
        current = act_on_chamber(&layer, &current)?;
        g = layer.after(&g);
        for (_, _, cell) in &cells[layer_start..layer_end] {
            for k in markings.balanced_keys(cell)? {
                let (have, want) = (current.value(&k)?, target.value(&k)?);
                if have != want {
                    return Err(Error::ConnectMismatch(format!("{} p={}: {have} vs {want}", k.cell, k.p)));
                }
            }
        }
        layer_start = layer_end;
    }
    if current != *target {
        return Err(Error::ConnectMismatch("final chamber index differs from the target".into()));
    }
    Ok(g)
}

/// Result of the structural checks on an automorphism.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PreservationReport {
    pub jacobian: bool,
    pub ideal: bool,
    pub homogeneity: bool,
    pub congruence: bool,
    pub details: Vec<String>,
}

impl PreservationReport {
    pub fn passed(&self) -> bool {
        self.jacobian && self.ideal && self.homogeneity && self.congruence
    }
}

fn u_sums(markings: &MarkingSet, m: &Monomial) -> Option<(i64, i64, i64)> {
    let u = m.as_u()?;
    let cell = Cell::new(u.pairs()).ok()?;
    let prof = markings.profile(&cell).ok()?;
    let sa: i64 = cell.labels().map(|l| markings.twist(l).map_or(0, |t| t.0 as i64)).sum();
    let sb: i64 = cell.labels().map(|l| markings.twist(l).map_or(0, |t| t.1 as i64)).sum();
    Some((prof.m, sa, sb))
}

/// Checks an arbitrary pair of coordinate images `(X, Y)`: unit Jacobian,
/// `x | X` and `y | Y`, weighted homogeneity and the residue symmetry.
pub fn check_automorphism<S: Scalar>(markings: &MarkingSet, x: &PotentialSeries<S>, y: &PotentialSeries<S>) -> PreservationReport {
    let params = markings.params();
    let (r, s, rs) = (params.r as i64, params.s as i64, params.rs());
    let mut rep = PreservationReport { jacobian: true, ideal: true, homogeneity: true, congruence: true, details: Vec::new() };
    let det = x
        .dx()
        .try_mul(&y.dy())
        .and_then(|a| x.dy().try_mul(&y.dx()).and_then(|b| a.try_sub(&b)));
    let one = PotentialSeries::monomial(x.ring(), x.grading(), UNBOUNDED, 0, 0, Element::one(x.ring()));
    match det {
        Ok(d) if d.with_bound(UNBOUNDED) == one => {}
        Ok(d) => {
            rep.jacobian = false;
            rep.details.push(format!("jacobian = {d}"));
        }
        Err(e) => {
            rep.jacobian = false;
            rep.details.push(e.to_string());
        }
    }
    for (name, series, base) in [("x", x, (1i64, 0i64, s)), ("y", y, (0, 1, r))] {
        for (&(k1, k2), c) in series.terms() {
            if (name == "x" && k1 == 0) || (name == "y" && k2 == 0) {
                rep.ideal = false;
                rep.details.push(format!("{name}-image term x^{k1} y^{k2} outside the ideal"));
            }
            for (m, _) in c.terms() {
                let Some((mk, sa, sb)) = u_sums(markings, m) else {
                    rep.homogeneity = false;
                    rep.details.push(format!("{name}-image coefficient {m} outside the marking set"));
                    continue;
                };
                let weight = s * k1 as i64 + r * k2 as i64;
                let expected = if m.is_one() { base.2 } else { base.2 + mk - rs };
                if weight != expected {
                    rep.homogeneity = false;
                    rep.details.push(format!("{name}-image term {m} x^{k1} y^{k2} has weight {weight}, expected {expected}"));
                }
                if (k1 as i64 - base.0 - sa).rem_euclid(r) != 0 || (k2 as i64 - base.1 - sb).rem_euclid(s) != 0 {
                    rep.congruence = false;
                    rep.details.push(format!("{name}-image term {m} x^{k1} y^{k2} breaks the residue symmetry"));
                }
            }
        }
    }
    rep
}

/// Structural checks on every factor of `g` and on `g` itself.
pub fn preservation_check<S: Scalar>(g: &GroupElement<S>, markings: &MarkingSet) -> Result<PreservationReport> {
    let params = markings.params();
    let ring = Ring::open(markings.twists().keys().copied());
    let grading = Grading::fermat(params.r, params.s);
    let mut rep = PreservationReport { jacobian: true, ideal: true, homogeneity: true, congruence: true, details: Vec::new() };
    let merge = |other: PreservationReport, rep: &mut PreservationReport| {
        rep.jacobian &= other.jacobian;
        rep.ideal &= other.ideal;
        rep.homogeneity &= other.homogeneity;
        rep.congruence &= other.congruence;
        rep.details.extend(other.details);
    };
    for factor in &g.factors {
        let (k1, k2) = factor.exponents();
        let prof = markings.profile(&factor.key().cell)?;
        if params.s as i64 * k1 as i64 + params.r as i64 * k2 as i64 != prof.m - params.rs() {
            rep.homogeneity = false;
            rep.details.push(format!("generator on {} has exponents ({k1},{k2}) off the weight identity", factor.key().cell));
        }
        let single = GroupElement { factors: vec![factor.clone()] };
        let (x, y) = images(&single, &ring, grading)?;
        merge(check_automorphism(markings, &x, &y), &mut rep);
    }
    let (x, y) = images(g, &ring, grading)?;
    merge(check_automorphism(markings, &x, &y), &mut rep);
    Ok(rep)
}

/// Serialized generator factor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorDoc {
    #[serde(rename = "J")]
    pub j: Vec<u32>,
    pub d: BTreeMap<u32, u32>,
    pub p: u32,
    pub c: String,
}

impl<S: ScalarText> GroupElement<S> {
    pub fn to_doc(&self) -> Vec<GeneratorDoc> {
        self.factors
            .iter()
            .map(|f| GeneratorDoc {
                j: f.key.cell.labels().collect(),
                d: f.key.cell.entries().iter().copied().collect(),
                p: f.key.p,
                c: f.c.to_text(),
            })
            .collect()
    }

    pub fn from_doc(markings: &MarkingSet, docs: &[GeneratorDoc]) -> Result<Self> {
        let mut factors = Vec::with_capacity(docs.len());
        for doc in docs {
            let labels: Vec<u32> = doc.d.keys().copied().collect();
            let mut sorted = doc.j.clone();
            sorted.sort_unstable();
            if labels != sorted {
                return Err(Error::InvalidCriticalKey(format!("J={:?} does not match descendents for {:?}", doc.j, labels)));
            }
            let cell = Cell::new(doc.d.iter().map(|(&l, &d)| (l, d)))?;
            let c = S::parse_text(&doc.c).ok_or_else(|| Error::InvalidCriticalKey(format!("bad rational {:?}", doc.c)))?;
            factors.push(make_generator(markings, CriticalKey { cell, p: doc.p }, c)?);
        }
        Ok(Self { factors })
    }
}
