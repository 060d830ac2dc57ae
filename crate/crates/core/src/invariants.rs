//! Closed extended invariants through amplitudes, and the recursion and
//! mirror-symmetry oracles built on them.

use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::Monomial;
use crate::bmodel::{self, CycleLabel};
use crate::chamber::ChamberIndex;
use crate::error::{Error, Result};
use crate::scalar::{sign, Scalar, ScalarText};
use crate::spin::{closed_selection_with, Cell, ClosedInsertion, Marking, MarkingSet, ModelParams, RamondRule, Selection};
use crate::wallcross::{act_on_chamber, random_element};

/// Relation between closed extended invariants and amplitudes with
/// `d = d(J,𝐝)`: `MirrorA` reads `⟨…⟩ = (−1)^{d−1} 𝒜`, `OpenMs` reads `⟨…⟩ = 𝒜`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    MirrorA,
    OpenMs,
}

impl SignConvention {
    /// The convention under which the closed recursion holds.
    pub const CALIBRATED: SignConvention = SignConvention::OpenMs;

    pub fn other(self) -> Self {
        match self {
            SignConvention::MirrorA => SignConvention::OpenMs,
            SignConvention::OpenMs => SignConvention::MirrorA,
        }
    }

    /// Factor turning an amplitude into an invariant at `d = d(J,𝐝)`.
    pub fn factor<S: Scalar>(self, d: i64) -> S {
        match self {
            SignConvention::MirrorA => sign(d - 1),
            SignConvention::OpenMs => S::one(),
        }
    }
}

impl Default for SignConvention {
    fn default() -> Self {
        Self::CALIBRATED
    }
}

/// Canonical cache key: sorted `(a, b, d)` of the open markings.
type Signature = Vec<(u32, u32, u32)>;

/// Evaluates amplitudes and closed extended invariants for one `(r, s)`,
/// caching amplitudes by twist-descendent multiset.
pub struct InvariantEngine<S> {
    params: ModelParams,
    conv: SignConvention,
    rule: RamondRule,
    cache: RwLock<HashMap<Signature, S>>,
}

/// Outcome of one closed-recursion instance.
#[derive(Clone, Debug, PartialEq)]
pub enum ClosedTrr<S> {
    /// `LHS − RHS` with the number of nonzero terms seen.
    Residual { residual: S, nonzero_terms: usize },
    /// Some needed invariant has no distinguished insertion.
    Unsupported(String),
}

impl<S: Scalar> InvariantEngine<S> {
    pub fn new(params: ModelParams, conv: SignConvention) -> Self {
        Self { params, conv, rule: RamondRule::default(), cache: RwLock::new(HashMap::new()) }
    }

    pub fn with_ramond_rule(mut self, rule: RamondRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn convention(&self) -> SignConvention {
        self.conv
    }

    /// `𝒜(J, 𝐝)` for open markings given as `(a, b, d)`, evaluated on a
    /// minimal chamber index whose descendent bounds are the `d` themselves.
    pub fn amplitude_of(&self, entries: &[(u32, u32, u32)]) -> Result<S> {
        let mut sig: Signature = entries.to_vec();
        sig.sort_unstable();
        if let Some(v) = self.cache.read().expect("cache lock").get(&sig) {
            return Ok(v.clone());
        }
        let markings: Vec<Marking> = sig.iter().enumerate().map(|(i, &(a, b, _))| Marking { label: i as u32 + 1, a, b }).collect();
        let set = MarkingSet::new(self.params, &markings)?;
        let dmax: BTreeMap<u32, u32> = sig.iter().enumerate().map(|(i, &(_, _, d))| (i as u32 + 1, d)).collect();
        let cell = Cell::new(dmax.iter().map(|(&l, &d)| (l, d)))?;
        let nu = ChamberIndex::<S>::build_minimal(set, dmax)?;
        let value = nu.amplitude(&cell)?;
        self.cache.write().expect("cache lock").insert(sig, value.clone());
        Ok(value)
    }

    pub fn selection(&self, insertions: &[ClosedInsertion]) -> Result<Selection> {
        closed_selection_with(self.params, insertions, self.rule)
    }

    /// Indices that may serve as the distinguished insertion: twist at most
    /// `(r−2, s−2)` with every other twist non-negative.
    pub fn candidates(&self, insertions: &[ClosedInsertion]) -> Vec<usize> {
        let (r, s) = (self.params.r as i32, self.params.s as i32);
        (0..insertions.len())
            .filter(|&i| {
                let p = insertions[i];
                p.a <= r - 2
                    && p.b <= s - 2
                    && insertions.iter().enumerate().all(|(j, q)| j == i || (q.a >= 0 && q.b >= 0))
            })
            .collect()
    }

    /// `⟨∏ τ_{d_i}^{(a_i,b_i)}⟩^ext`.
    pub fn ext_invariant(&self, insertions: &[ClosedInsertion]) -> Result<S> {
        let sel = self.selection(insertions)?;
        if sel.forces_zero() {
            return Ok(S::zero());
        }
        let mut sorted = insertions.to_vec();
        sorted.sort_unstable();
        let i0 = *self.candidates(&sorted).first().ok_or_else(|| {
            let shown: Vec<String> = insertions.iter().map(ToString::to_string).collect();
            Error::NoDistinguishedInsertion(shown.join(" "))
        })?;
        self.evaluate_at(&sorted, i0)
    }

    /// Same invariant computed with insertion `i0` as the distinguished point.
    pub fn ext_invariant_at(&self, insertions: &[ClosedInsertion], i0: usize) -> Result<S> {
        let sel = self.selection(insertions)?;
        if sel.forces_zero() {
            return Ok(S::zero());
        }
        if !self.candidates(insertions).contains(&i0) {
            return Err(Error::NoDistinguishedInsertion(format!("insertion {i0} cannot be distinguished")));
        }
        self.evaluate_at(insertions, i0)
    }

    fn evaluate_at(&self, insertions: &[ClosedInsertion], i0: usize) -> Result<S> {
        let (r, s) = (self.params.r as i64, self.params.s as i64);
        let dist = insertions[i0];
        let rest: Vec<(u32, u32, u32)> = insertions
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i0)
            .map(|(_, q)| (q.a as u32, q.b as u32, q.d))
            .collect();
        let prof = crate::spin::twist_profile(self.params, rest.iter().copied());
        if prof.r_j as i64 != (r - 2 - dist.a as i64).rem_euclid(r)
            || prof.s_j as i64 != (s - 2 - dist.b as i64).rem_euclid(s)
            || dist.d as i64 != prof.d_j
        {
            return Err(Error::Internal(format!(
                "distinguished {dist} does not match the remaining profile (r(J)={}, s(J)={}, d(J)={})",
                prof.r_j, prof.s_j, prof.d_j
            )));
        }
        let a = self.amplitude_of(&rest)?;
        Ok(a * self.conv.factor::<S>(prof.d_j))
    }

    /// `LHS − RHS` of the first open recursion (`j2 = None`) or of the
    /// second one (`j2` forced into `B`, no subtracted term).
    pub fn verify_open_trr(&self, markings: &MarkingSet, cell: &Cell, j1: u32, j2: Option<u32>) -> Result<S> {
        let (r, s) = (self.params.r as i32, self.params.s as i32);
        if cell.descendent(j1).is_none() || cell.len() != markings.len() {
            return Err(Error::OutOfDomain(format!("cell {cell} must cover every marking and contain {j1}")));
        }
        if let Some(j2) = j2 {
            if j2 == j1 || cell.descendent(j2).is_none() {
                return Err(Error::OutOfDomain(format!("second marking {j2} invalid for {cell}")));
            }
        }
        let entry = |l: u32| -> (u32, u32, u32) {
            let (a, b) = markings.twist(l).expect("cell labels are markings");
            (a, b, cell.descendent(l).expect("label in cell"))
        };
        let all: Vec<(u32, u32, u32)> = cell.labels().map(entry).collect();
        let bumped: Vec<(u32, u32, u32)> = cell.labels().map(|l| {
            let (a, b, d) = entry(l);
            (a, b, if l == j1 { d + 1 } else { d })
        }).collect();
        let lhs = self.amplitude_of(&bumped)?;
        let first = entry(j1);
        let others: Vec<u32> = cell.labels().filter(|&l| l != j1).collect();
        let mut rhs = S::zero();
        for a in -1..=r - 2 {
            for b in -1..=s - 2 {
                let z = ((r - 2 - a) as u32, (s - 2 - b) as u32, 0u32);
                for mask in 1u64..(1 << others.len()) {
                    let in_a = |i: usize| mask >> i & 1 == 1;
                    if let Some(j2) = j2 {
                        let pos = others.iter().position(|&l| l == j2).expect("j2 among others");
                        if in_a(pos) {
                            continue;
                        }
                    }
                    let mut closed = vec![ClosedInsertion::new(a, b, 0), ClosedInsertion::new(first.0 as i32, first.1 as i32, first.2)];
                    let mut open = vec![z];
                    for (i, &l) in others.iter().enumerate() {
                        let (ea, eb, ed) = entry(l);
                        if in_a(i) {
                            closed.push(ClosedInsertion::new(ea as i32, eb as i32, ed));
                        } else {
                            open.push((ea, eb, ed));
                        }
                    }
                    let c = self.ext_invariant(&closed)?;
                    if c.is_zero() {
                        continue;
                    }
                    rhs = rhs + c * self.amplitude_of(&open)?;
                }
            }
        }
        if j2.is_none() {
            rhs = rhs - self.amplitude_of(&all)?;
        }
        Ok(lhs - rhs)
    }

    /// `LHS − RHS` of the solved form expressing `𝒜(I, 𝐝)` through
    /// invariants containing the first two markings of `cell`.
    pub fn verify_solved_form(&self, markings: &MarkingSet, cell: &Cell) -> Result<S> {
        let (r, s) = (self.params.r as i32, self.params.s as i32);
        if cell.len() < 2 || cell.len() != markings.len() {
            return Err(Error::OutOfDomain(format!("cell {cell} must cover every marking, |I| >= 2")));
        }
        let entry = |l: u32| -> (u32, u32, u32) {
            let (a, b) = markings.twist(l).expect("cell labels are markings");
            (a, b, cell.descendent(l).expect("label in cell"))
        };
        let labels: Vec<u32> = cell.labels().collect();
        let all: Vec<(u32, u32, u32)> = labels.iter().map(|&l| entry(l)).collect();
        let lhs = self.amplitude_of(&all)?;
        let rest = &all[2..];
        let mut rhs = S::zero();
        for a in -1..=r - 2 {
            for b in -1..=s - 2 {
                let z = ((r - 2 - a) as u32, (s - 2 - b) as u32, 0u32);
                for mask in 0u64..(1 << rest.len()) {
                    let mut closed = vec![ClosedInsertion::new(a, b, 0)];
                    closed.extend(all[..2].iter().map(|&(ea, eb, ed)| ClosedInsertion::new(ea as i32, eb as i32, ed)));
                    let mut open = vec![z];
                    for (i, &(ea, eb, ed)) in rest.iter().enumerate() {
                        if mask >> i & 1 == 1 {
                            closed.push(ClosedInsertion::new(ea as i32, eb as i32, ed));
                        } else {
                            open.push((ea, eb, ed));
                        }
                    }
                    let c = self.ext_invariant(&closed)?;
                    if !c.is_zero() {
                        rhs = rhs + c * self.amplitude_of(&open)?;
                    }
                }
            }
        }
        Ok(lhs - rhs)
    }

    /// Evaluates one factor of the closed recursion; `Ok(None)` flags an
    /// unsupported invariant. Invariants with two `−1` twists in one
    /// coordinate are not defined and contribute zero.
    fn factor(&self, insertions: &[ClosedInsertion]) -> Result<Option<S>> {
        match self.selection(insertions) {
            Err(Error::DoubleNegative) => return Ok(Some(S::zero())),
            Err(e) => return Err(e),
            Ok(sel) if sel.forces_zero() => return Ok(Some(S::zero())),
            Ok(_) => {}
        }
        match self.ext_invariant(insertions) {
            Ok(v) => Ok(Some(v)),
            Err(Error::NoDistinguishedInsertion(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn is_forced_zero(&self, insertions: &[ClosedInsertion]) -> bool {
        match self.selection(insertions) {
            Err(_) => true,
            Ok(sel) => sel.forces_zero(),
        }
    }

    /// `LHS − RHS` of the closed extended recursion. The first insertion
    /// carries the raised descendent (`d ≥ 1`); the second and third are the
    /// points forced into the same factor.
    pub fn verify_closed_trr(&self, insertions: &[ClosedInsertion]) -> Result<ClosedTrr<S>> {
        if insertions.len() < 3 || insertions[0].d == 0 {
            return Err(Error::OutOfDomain("closed recursion needs n >= 3 and d_1 >= 1".into()));
        }
        let (r, s) = (self.params.r as i32, self.params.s as i32);
        let describe = |ins: &[ClosedInsertion]| ins.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        let mut nonzero = 0;
        let lhs = match self.factor(insertions)? {
            Some(v) => v,
            None => return Ok(ClosedTrr::Unsupported(describe(insertions))),
        };
        if !lhs.is_zero() {
            nonzero += 1;
        }
        let mut lowered = insertions[0];
        lowered.d -= 1;
        let rest = &insertions[3..];
        let mut rhs = S::zero();
        for a in -1..=r - 1 {
            for b in -1..=s - 1 {
                for mask in 0u64..(1 << rest.len()) {
                    let mut left = vec![ClosedInsertion::new(r - 2 - a, s - 2 - b, 0), insertions[1], insertions[2]];
                    let mut right = vec![ClosedInsertion::new(a, b, 0), lowered];
                    for (i, q) in rest.iter().enumerate() {
                        if mask >> i & 1 == 1 {
                            left.push(*q);
                        } else {
                            right.push(*q);
                        }
                    }
                    if self.is_forced_zero(&left) || self.is_forced_zero(&right) {
                        continue;
                    }
                    let (Some(x), Some(y)) = (self.factor(&left)?, self.factor(&right)?) else {
                        return Ok(ClosedTrr::Unsupported(format!("{} | {}", describe(&left), describe(&right))));
                    };
                    let term = x * y;
                    if !term.is_zero() {
                        nonzero += 1;
                    }
                    rhs = rhs + term;
                }
            }
        }
        Ok(ClosedTrr::Residual { residual: lhs - rhs, nonzero_terms: nonzero })
    }

    /// All ways of computing the invariant agree.
    pub fn distinguished_independent(&self, insertions: &[ClosedInsertion]) -> Result<bool> {
        if self.is_forced_zero(insertions) {
            return Ok(true);
        }
        let mut values = Vec::new();
        for i0 in self.candidates(insertions) {
            values.push(self.ext_invariant_at(insertions, i0)?);
        }
        Ok(values.windows(2).all(|w| w[0] == w[1]))
    }
}

/// `⟨∏ τ⟩^ext` on a one-off engine.
pub fn ext_invariant<S: Scalar>(params: ModelParams, insertions: &[ClosedInsertion], conv: SignConvention) -> Result<S> {
    InvariantEngine::new(params, conv).ext_invariant(insertions)
}

/// Closed-recursion instances for `n` insertions with twists in
/// `−1..r−1 × −1..s−1`, the first carrying descendent `d1` and the others
/// descendents up to `dmax`, second and third unordered. Only instances with
/// at least one nonzero side survive the selection rules.
pub fn closed_trr_instances(params: ModelParams, n: usize, d1: u32, dmax: u32) -> Vec<Vec<ClosedInsertion>> {
    let (r, s) = (params.r as i32, params.s as i32);
    let mut all = Vec::new();
    for a in -1..r {
        for b in -1..s {
            for d in 0..=dmax {
                all.push(ClosedInsertion::new(a, b, d));
            }
        }
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    fn rec(
        all: &[ClosedInsertion],
        n: usize,
        d1: u32,
        current: &mut Vec<ClosedInsertion>,
        out: &mut Vec<Vec<ClosedInsertion>>,
        params: ModelParams,
    ) {
        if current.len() == n {
            let mut lifted = current.clone();
            lifted[0].d = d1;
            let neg_a = lifted.iter().filter(|i| i.a == -1).count();
            let neg_b = lifted.iter().filter(|i| i.b == -1).count();
            if neg_a <= 1 && neg_b <= 1 {
                let sa: i64 = lifted.iter().map(|i| i.a as i64).sum();
                let sb: i64 = lifted.iter().map(|i| i.b as i64).sum();
                let sd: i64 = lifted.iter().map(|i| i.d as i64).sum();
                let (r, s) = (params.r as i64, params.s as i64);
                let n1 = sa - (r - 2);
                let n2 = sb - (s - 2);
                if n1.rem_euclid(r) == 0 && n2.rem_euclid(s) == 0 && n as i64 - 3 == n1 / r + n2 / s + sd {
                    out.push(lifted);
                }
            }
            return;
        }
        for (idx, q) in all.iter().enumerate() {
            let pos = current.len();
            if pos == 0 && q.d != 0 {
                continue;
            }
            if pos == 2 && all.iter().position(|x| x == &current[1]).is_some_and(|p1| idx < p1) {
                continue;
            }
            if pos >= 4 && all.iter().position(|x| x == &current[pos - 1]).is_some_and(|pp| idx < pp) {
                continue;
            }
            current.push(*q);
            rec(all, n, d1, current, out, params);
            current.pop();
        }
    }
    rec(&all, n, d1, &mut current, &mut out, params);
    out
}

/// One expected-versus-observed mismatch in the mirror report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShapeMismatch {
    pub cell: String,
    pub cycle: String,
    pub detail: String,
}

/// Summary of the mirror-symmetry checks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MirrorReport {
    pub convention: SignConvention,
    pub shape_ok: bool,
    pub shape_mismatches: Vec<ShapeMismatch>,
    pub wallcross_ok: bool,
    pub wallcross_samples: usize,
    /// `None` when the marking set has no symmetric potential.
    pub flat_ok: Option<bool>,
    /// Per good-basis cycle, the head `δ + Σ t_{a,b,d} ħ^{d−1}`.
    pub head_terms: BTreeMap<String, Vec<String>>,
}

impl MirrorReport {
    pub fn passed(&self) -> bool {
        self.shape_ok && self.wallcross_ok && self.flat_ok.unwrap_or(true)
    }
}

/// Compares period integrals of `W^ν` with the closed-extended generating
/// function, re-checks amplitudes under random wall-crossing, and checks the
/// flat-coordinate head of the symmetric potential when one exists.
pub fn verify_mirror<S: ScalarText, R: Rng>(
    nu: &ChamberIndex<S>,
    conv: SignConvention,
    samples: usize,
    rng: &mut R,
) -> Result<MirrorReport> {
    let params = nu.params();
    let engine = InvariantEngine::<S>::new(params, conv);
    let w = bmodel::build_potential(nu)?;
    let table = bmodel::period_table(params, &w)?;
    let mut mismatches = Vec::new();
    for cell in nu.cells() {
        if cell.is_empty() {
            continue;
        }
        let prof = nu.profile(&cell)?;
        let expected = if prof.size == 1 {
            sign::<S>(cell.entries()[0].1 as i64)
        } else if prof.d_j < 0 {
            S::zero()
        } else {
            let mut ins: Vec<ClosedInsertion> = cell
                .entries()
                .iter()
                .map(|&(l, d)| {
                    let (a, b) = nu.markings().twist(l).expect("domain label");
                    ClosedInsertion::new(a as i32, b as i32, d)
                })
                .collect();
            ins.push(ClosedInsertion::new(
                params.r as i32 - prof.r_j as i32 - 2,
                params.s as i32 - prof.s_j as i32 - 2,
                prof.d_j as u32,
            ));
            engine.ext_invariant(&ins)? * conv.factor::<S>(prof.d_j)
        };
        let exponent = -prof.d_j - 2;
        let coeff = expected * sign::<S>(cell.len() as i64 + exponent);
        let mono = bmodel::u_monomial(&cell);
        let home = CycleLabel { a: prof.r_j, b: prof.s_j };
        for (cycle, series) in &table {
            for (e, c) in series.terms() {
                let got = c.coefficient(&mono);
                let want = if *cycle == home && e == exponent { coeff.clone() } else { S::zero() };
                if got != want {
                    mismatches.push(ShapeMismatch {
                        cell: cell.to_string(),
                        cycle: cycle.to_string(),
                        detail: format!("hbar^{e}: got {}, expected {}", got.to_text(), want.to_text()),
                    });
                }
            }
            if *cycle == home && !coeff.is_zero() && series.coefficient(exponent).coefficient(&mono).is_zero() {
                mismatches.push(ShapeMismatch {
                    cell: cell.to_string(),
                    cycle: cycle.to_string(),
                    detail: format!("hbar^{exponent}: missing, expected {}", coeff.to_text()),
                });
            }
        }
    }

    let base = nu.amplitudes()?;
    let mut wallcross_ok = true;
    for _ in 0..samples {
        let g = random_element(nu.markings(), nu.dmax(), 5, rng)?;
        let moved = act_on_chamber(&g, nu)?;
        if moved.amplitudes()? != base {
            wallcross_ok = false;
        }
    }

    let mut head_terms = BTreeMap::new();
    let flat_ok = match bmodel::psi_for(nu.markings()) {
        Err(_) => None,
        Ok(_) => {
            let sym = nu.symmetrize()?;
            let (ws, _) = bmodel::build_potential_sym(&sym)?;
            let stable = bmodel::period_table(params, &ws)?;
            let mut ok = true;
            for (cycle, series) in &stable {
                if !cycle.is_good_basis(params) {
                    continue;
                }
                ok &= bmodel::flat_head(series, *cycle).holds;
                let mut head = Vec::new();
                for (e, c) in series.terms() {
                    for (m, v) in c.terms() {
                        if let Monomial::T(t) = m {
                            match t.degree() {
                                0 => head.push(format!("{}*hbar^{e}", v.to_text())),
                                1 => head.push(format!("{}*{t}*hbar^{e}", v.to_text())),
                                _ => {}
                            }
                        }
                    }
                }
                head_terms.insert(cycle.to_string(), head);
            }
            Some(ok)
        }
    };

    Ok(MirrorReport {
        convention: conv,
        shape_ok: mismatches.is_empty(),
        shape_mismatches: mismatches,
        wallcross_ok,
        wallcross_samples: samples,
        flat_ok,
        head_terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, Rational};

    fn p33() -> ModelParams {
        ModelParams::new(3, 3).unwrap()
    }

    #[test]
    fn three_point_magnitude() {
        let ins = [ClosedInsertion::new(-1, -1, 0), ClosedInsertion::new(1, 1, 0), ClosedInsertion::new(1, 1, 0)];
        let open: Rational = ext_invariant(p33(), &ins, SignConvention::OpenMs).unwrap();
        let mirror: Rational = ext_invariant(p33(), &ins, SignConvention::MirrorA).unwrap();
        assert_eq!(open, int(1));
        assert_eq!(mirror, int(-1));
    }

    #[test]
    fn forced_zeros() {
        let engine = InvariantEngine::<Rational>::new(p33(), SignConvention::OpenMs);
        let dim = [ClosedInsertion::new(1, 1, 1), ClosedInsertion::new(0, 0, 0), ClosedInsertion::new(0, 0, 0)];
        assert_eq!(engine.ext_invariant(&dim).unwrap(), int(0));
        let ramond = [
            ClosedInsertion::new(2, 0, 0),
            ClosedInsertion::new(2, 0, 0),
            ClosedInsertion::new(0, 0, 0),
            ClosedInsertion::new(0, 1, 0),
        ];
        assert_eq!(engine.ext_invariant(&ramond).unwrap(), int(0));
        let dbl = [ClosedInsertion::new(-1, 1, 0), ClosedInsertion::new(-1, 1, 0), ClosedInsertion::new(1, 1, 0)];
        assert_eq!(engine.ext_invariant(&dbl), Err(Error::DoubleNegative));
    }

    #[test]
    fn permutation_invariance() {
        let engine = InvariantEngine::<Rational>::new(p33(), SignConvention::OpenMs);
        let ins = [ClosedInsertion::new(1, 1, 0), ClosedInsertion::new(-1, -1, 0), ClosedInsertion::new(1, 1, 0)];
        let mut rev = ins;
        rev.reverse();
        assert_eq!(engine.ext_invariant(&ins).unwrap(), engine.ext_invariant(&rev).unwrap());
    }

    fn marking_set(twists: &[(u32, u32)]) -> MarkingSet {
        let ms: Vec<Marking> = twists.iter().enumerate().map(|(i, &(a, b))| Marking { label: i as u32 + 1, a, b }).collect();
        MarkingSet::new(p33(), &ms).unwrap()
    }

    #[test]
    fn single_marking_open_recursion() {
        let engine = InvariantEngine::<Rational>::new(p33(), SignConvention::default());
        let ms = marking_set(&[(2, 2)]);
        for d in 0..3 {
            let cell = Cell::new([(1, d)]).unwrap();
            assert_eq!(engine.verify_open_trr(&ms, &cell, 1, None).unwrap(), int(0));
        }
    }

    #[test]
    fn rejected_convention_breaks_closed_recursion() {
        let ins = [
            ClosedInsertion::new(0, 0, 1),
            ClosedInsertion::new(-1, -1, 0),
            ClosedInsertion::new(0, 0, 0),
            ClosedInsertion::new(2, 2, 0),
        ];
        let good = InvariantEngine::<Rational>::new(p33(), SignConvention::OpenMs);
        let bad = InvariantEngine::<Rational>::new(p33(), SignConvention::MirrorA);
        let residual = |e: &InvariantEngine<Rational>| match e.verify_closed_trr(&ins).unwrap() {
            ClosedTrr::Residual { residual, .. } => residual,
            ClosedTrr::Unsupported(s) => panic!("unsupported: {s}"),
        };
        assert_eq!(residual(&good), int(0));
        assert_eq!(residual(&bad), int(-2));
    }

    #[test]
    fn distinguished_choice_is_irrelevant() {
        let engine = InvariantEngine::<Rational>::new(p33(), SignConvention::default());
        let ins = [ClosedInsertion::new(1, 1, 0), ClosedInsertion::new(1, 1, 0), ClosedInsertion::new(1, 1, 0), ClosedInsertion::new(0, 0, 0)];
        assert!(engine.candidates(&ins).len() > 1);
        assert!(engine.distinguished_independent(&ins).unwrap());
    }

    #[test]
    fn mirror_report_is_chamber_independent() {
        use rand::SeedableRng;
        let ms = marking_set(&[(1, 1), (1, 1), (0, 1)]);
        let dmax = ms.twists().keys().map(|&l| (l, 1)).collect();
        let nu = ChamberIndex::<Rational>::build_minimal(ms, dmax).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let report = verify_mirror(&nu, SignConvention::default(), 3, &mut rng).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.flat_ok, Some(true));
        assert_eq!(report.head_terms["(1,1)"], vec!["1*t[1,1,0]*hbar^-1".to_string(), "1*t[1,1,1]*hbar^0".to_string()]);
        assert_eq!(report.head_terms["(0,0)"], vec!["1*hbar^0".to_string()]);

        let g = random_element(nu.markings(), nu.dmax(), 4, &mut rng).unwrap();
        let moved = act_on_chamber(&g, &nu).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let again = verify_mirror(&moved, SignConvention::default(), 3, &mut rng).unwrap();
        assert_eq!(again, report);
    }
}
