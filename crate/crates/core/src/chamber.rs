//! Chamber indices: storage, amplitudes, axiom checks and the minimal builder.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{int, ratio, sign, Scalar, ScalarText};
use crate::spin::{gamma_ratio, ordered_partitions, BalancedKey, Cell, Marking, MarkingSet, ModelParams, TwistProfile};

/// Assignment of a scalar to every balanced graph `Γ_{J,p}` with `J ⊆ I` and
/// descendents bounded by `dmax`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChamberIndex<S> {
    markings: MarkingSet,
    dmax: BTreeMap<u32, u32>,
    values: BTreeMap<BalancedKey, S>,
}

/// Which axiom a violation concerns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// Normalization on empty and singleton, zero-descendent graphs.
    Normalization,
    /// Singleton amplitudes equal `(−1)^d`.
    Singleton,
    /// Vanishing amplitude for constrained cells with `|J| ≥ 2`.
    Vanishing,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub condition: Condition,
    pub cell: Cell,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} on {}: {}", self.condition, self.cell, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AxiomReport {
    pub violations: Vec<Violation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Sorted `(a, b, d)` of a cell: its class under relabeling within twists.
type Signature = Vec<(u32, u32, u32)>;

fn uniform_or(dmax: &BTreeMap<u32, u32>, label: u32) -> u32 {
    dmax.get(&label).copied().unwrap_or(0)
}

/// Multiset of `(a, b, d)` over a cell: invariant under twist-preserving
/// relabelings.
fn signature(markings: &MarkingSet, cell: &Cell) -> Vec<(u32, u32, u32)> {
    let mut sig: Vec<(u32, u32, u32)> = cell
        .entries()
        .iter()
        .map(|&(l, d)| {
            let (a, b) = markings.twist(l).expect("cell label belongs to marking set");
            (a, b, d)
        })
        .collect();
    sig.sort_unstable();
    sig
}

impl<S: Scalar> ChamberIndex<S> {
    /// Wraps explicit values; every in-domain key must be present and no other.
    pub fn from_values(markings: MarkingSet, dmax: BTreeMap<u32, u32>, values: BTreeMap<BalancedKey, S>) -> Result<Self> {
        let out = Self { markings, dmax, values: BTreeMap::new() };
        let mut expected = BTreeSet::new();
        for cell in out.cells() {
            for key in out.markings.balanced_keys(&cell)? {
                expected.insert(key);
            }
        }
        for key in values.keys() {
            if !expected.contains(key) {
                return Err(Error::OutOfDomain(format!("value for {} p={} outside the domain", key.cell, key.p)));
            }
        }
        if let Some(missing) = expected.iter().find(|k| !values.contains_key(*k)) {
            return Err(Error::OutOfDomain(format!("missing value for {} p={}", missing.cell, missing.p)));
        }
        Ok(Self { values, ..out })
    }

    pub fn markings(&self) -> &MarkingSet {
        &self.markings
    }

    pub fn params(&self) -> ModelParams {
        self.markings.params()
    }

    pub fn dmax(&self) -> &BTreeMap<u32, u32> {
        &self.dmax
    }

    pub fn values(&self) -> &BTreeMap<BalancedKey, S> {
        &self.values
    }

    /// All in-domain cells ordered by `|J|`, labels, descendents.
    pub fn cells(&self) -> Vec<Cell> {
        self.markings.cells(&self.dmax)
    }

    pub fn contains_cell(&self, cell: &Cell) -> bool {
        cell.entries()
            .iter()
            .all(|&(l, d)| self.markings.twist(l).is_some() && d <= uniform_or(&self.dmax, l))
    }

    pub fn profile(&self, cell: &Cell) -> Result<TwistProfile> {
        self.markings.profile(cell)
    }

    pub fn value(&self, key: &BalancedKey) -> Result<S> {
        self.values
            .get(key)
            .cloned()
            .ok_or_else(|| Error::OutOfDomain(format!("no balanced graph p={} on {}", key.p, key.cell)))
    }

    /// Overwrites one value; the key must be in the domain.
    pub fn set(&mut self, key: &BalancedKey, v: S) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = v;
                Ok(())
            }
            None => Err(Error::OutOfDomain(format!("no balanced graph p={} on {}", key.p, key.cell))),
        }
    }

    fn check_cell(&self, cell: &Cell) -> Result<()> {
        if self.contains_cell(cell) {
            Ok(())
        } else {
            Err(Error::OutOfDomain(format!("cell {cell} outside the declared domain")))
        }
    }

    /// Block weights `Σ_p ν(B,p) · δ_{(k1,k2)}` for every sub-cell mask.
    fn block_weights(&self, cell: &Cell) -> Result<Vec<Vec<(u32, u32, S)>>> {
        let n = cell.len();
        let mut out = vec![Vec::new(); 1 << n];
        for (mask, slot) in out.iter_mut().enumerate().skip(1) {
            let sub = cell.subcell(mask as u64);
            let prof = self.markings.profile(&sub)?;
            for (p, k1, k2) in prof.balanced_exponents() {
                let v = self.value(&BalancedKey { cell: sub.clone(), p })?;
                if !v.is_zero() {
                    slot.push((k1, k2, v));
                }
            }
        }
        Ok(out)
    }

    fn gamma_weight(&self, prof: &TwistProfile, k1: u32, k2: u32) -> S {
        let (r, s) = (prof.r as i64, prof.s as i64);
        let n1 = (k1 - prof.r_j) / prof.r;
        let n2 = (k2 - prof.s_j) / prof.s;
        gamma_ratio(&ratio::<S>(1 + prof.r_j as i64, r), n1) * gamma_ratio(&ratio::<S>(1 + prof.s_j as i64, s), n2)
    }

    /// `𝒜(J, 𝐝, ν)`. The ordered-partition sum weighted by `1/h!` equals the
    /// sum over unordered set partitions because the summand is symmetric in
    /// the blocks; the latter is evaluated by a subset recursion.
    pub fn amplitude(&self, cell: &Cell) -> Result<S> {
        self.check_cell(cell)?;
        let n = cell.len();
        if n == 0 {
            return Ok(S::zero());
        }
        let weights = self.block_weights(cell)?;
        let full = (1usize << n) - 1;
        let mut table: Vec<BTreeMap<(u32, u32), S>> = vec![BTreeMap::new(); 1 << n];
        table[0].insert((0, 0), S::one());
        for t in 1..=full {
            let low = t & t.wrapping_neg();
            let rest = t & !low;
            let mut acc: BTreeMap<(u32, u32), S> = BTreeMap::new();
            let mut sub = rest;
            loop {
                let block = sub | low;
                let remainder = t & !block;
                for (k1, k2, v) in &weights[block] {
                    for (&(c1, c2), w) in &table[remainder] {
                        let e = acc.entry((k1 + c1, k2 + c2)).or_insert_with(S::zero);
                        *e = e.clone() + v.clone() * w.clone();
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
            acc.retain(|_, v| !v.is_zero());
            table[t] = acc;
        }
        let prof = self.markings.profile(cell)?;
        let mut total = S::zero();
        for (&(k1, k2), c) in &table[full] {
            total = total + c.clone() * self.gamma_weight(&prof, k1, k2);
        }
        Ok(total)
    }

    /// Literal evaluation over ordered partitions with the `1/h!` weight.
    pub fn amplitude_by_partitions(&self, cell: &Cell) -> Result<S> {
        self.check_cell(cell)?;
        let prof = self.markings.profile(cell)?;
        let idx: Vec<usize> = (0..cell.len()).collect();
        let mut total = S::zero();
        let mut fact = S::one();
        for h in 1..=cell.len() {
            fact = fact * int::<S>(h as i64);
            let mut sum_h = S::zero();
            for parts in ordered_partitions(&idx, h) {
                let mut partial: Vec<(u32, u32, S)> = vec![(0, 0, S::one())];
                for block in parts {
                    let mask = block.iter().fold(0u64, |m, &i| m | 1 << i);
                    let sub = cell.subcell(mask);
                    let bp = self.markings.profile(&sub)?;
                    let mut next = Vec::new();
                    for (p, k1, k2) in bp.balanced_exponents() {
                        let v = self.value(&BalancedKey { cell: sub.clone(), p })?;
                        for (c1, c2, w) in &partial {
                            next.push((c1 + k1, c2 + k2, w.clone() * v.clone()));
                        }
                    }
                    partial = next;
                }
                for (k1, k2, w) in partial {
                    sum_h = sum_h + w * self.gamma_weight(&prof, k1, k2);
                }
            }
            total = total + sum_h / fact.clone();
        }
        Ok(total)
    }

    /// Amplitudes of every non-empty in-domain cell.
    pub fn amplitudes(&self) -> Result<BTreeMap<Cell, S>> {
        let cells: Vec<Cell> = self.cells().into_iter().filter(|c| !c.is_empty()).collect();
        let results: Vec<Result<(Cell, S)>> = cells
            .into_par_iter()
            .map(|c| {
                let a = self.amplitude(&c)?;
                Ok((c, a))
            })
            .collect();
        results.into_iter().collect()
    }

    /// Target amplitude for constrained cells.
    fn target(prof: &TwistProfile, cell: &Cell) -> S {
        if prof.size == 1 {
            sign(cell.entries()[0].1 as i64)
        } else {
            S::zero()
        }
    }

    /// Solves the constraint of `cell` for `ν_{p=0}`, keeping `ν_{p≥1}`.
    fn resolve_pivot(&mut self, cell: &Cell, prof: &TwistProfile) -> Result<()> {
        let target = Self::target(prof, cell);
        let keys = self.markings.balanced_keys(cell)?;
        let Some(first) = keys.first() else {
            let rest = self.amplitude(cell)?;
            if rest != target {
                return Err(Error::Internal(format!(
                    "cell {cell} is constrained without balanced graphs but its amplitude is {rest}"
                )));
            }
            return Ok(());
        };
        self.set(first, S::zero())?;
        let rest = self.amplitude(cell)?;
        let pivot = gamma_ratio(&ratio::<S>(1 + prof.s_j as i64, prof.s as i64), prof.n as u32);
        self.set(first, (target - rest) / pivot)
    }

    fn zeros(markings: MarkingSet, dmax: BTreeMap<u32, u32>) -> Result<Self> {
        let mut out = Self { markings, dmax, values: BTreeMap::new() };
        for cell in out.cells() {
            for key in out.markings.balanced_keys(&cell)? {
                out.values.insert(key, S::zero());
            }
        }
        Ok(out)
    }

    /// Canonical chamber index: free directions set to zero, each constrained
    /// cell solved for its `p = 0` value, by induction on `|J|`.
    pub fn build_minimal(markings: MarkingSet, dmax: BTreeMap<u32, u32>) -> Result<Self> {
        let mut out = Self::zeros(markings, dmax)?;
        for cell in out.cells() {
            let prof = out.markings.profile(&cell)?;
            match prof.size {
                0 => {
                    for key in out.markings.balanced_keys(&cell)? {
                        out.set(&key, -S::one())?;
                    }
                }
                1 if cell.entries()[0].1 == 0 => {
                    for key in out.markings.balanced_keys(&cell)? {
                        out.set(&key, S::one())?;
                    }
                }
                _ if prof.is_constrained() => out.resolve_pivot(&cell, &prof)?,
                _ => {}
            }
        }
        Ok(out)
    }

    pub fn check_axioms(&self) -> AxiomReport {
        let mut violations = Vec::new();
        for cell in self.cells() {
            let prof = match self.markings.profile(&cell) {
                Ok(p) => p,
                Err(e) => {
                    violations.push(Violation { condition: Condition::Normalization, cell, detail: e.to_string() });
                    continue;
                }
            };
            let keys = self.markings.balanced_keys(&cell).unwrap_or_default();
            let forced = match prof.size {
                0 => Some(-S::one()),
                1 if cell.entries()[0].1 == 0 => Some(S::one()),
                _ => None,
            };
            if let Some(expected) = forced {
                for key in &keys {
                    match self.value(key) {
                        Ok(v) if v == expected => {}
                        Ok(v) => violations.push(Violation {
                            condition: Condition::Normalization,
                            cell: cell.clone(),
                            detail: format!("value {v} at p={}, expected {expected}", key.p),
                        }),
                        Err(e) => violations.push(Violation {
                            condition: Condition::Normalization,
                            cell: cell.clone(),
                            detail: e.to_string(),
                        }),
                    }
                }
            }
            if prof.is_constrained() {
                let condition = if prof.size == 1 { Condition::Singleton } else { Condition::Vanishing };
                let target = Self::target(&prof, &cell);
                match self.amplitude(&cell) {
                    Ok(a) if a == target => {}
                    Ok(a) => violations.push(Violation {
                        condition,
                        cell: cell.clone(),
                        detail: format!("amplitude {a}, expected {target}"),
                    }),
                    Err(e) => violations.push(Violation { condition, cell: cell.clone(), detail: e.to_string() }),
                }
            }
        }
        AxiomReport { violations }
    }

    fn dmax_is_symmetric(&self) -> bool {
        let mut per_twist: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        for (&l, &tw) in self.markings.twists() {
            let d = uniform_or(&self.dmax, l);
            if *per_twist.entry(tw).or_insert(d) != d {
                return false;
            }
        }
        true
    }

    /// True when values depend only on the multiset of `(twist, d)` and `p`.
    pub fn is_symmetric(&self) -> bool {
        if !self.dmax_is_symmetric() {
            return false;
        }
        let mut seen: BTreeMap<(Signature, u32), &S> = BTreeMap::new();
        for (key, v) in &self.values {
            let sig = (signature(&self.markings, &key.cell), key.p);
            if let Some(prev) = seen.insert(sig, v) {
                if prev != v {
                    return false;
                }
            }
        }
        true
    }

    /// Projects onto symmetric chamber indices: by induction on `|J|`, values
    /// are averaged over each relabeling class and the `p = 0` value of every
    /// constrained cell is re-solved. Symmetric inputs are returned unchanged.
    pub fn symmetrize(&self) -> Result<Self> {
        if !self.dmax_is_symmetric() {
            return Err(Error::NotSymmetric("descendent bounds differ within a twist class".into()));
        }
        let mut classes: BTreeMap<(Signature, u32), Vec<BalancedKey>> = BTreeMap::new();
        for key in self.values.keys() {
            classes.entry((signature(&self.markings, &key.cell), key.p)).or_default().push(key.clone());
        }
        let mut out = self.clone();
        for members in classes.values() {
            let mut sum = S::zero();
            for k in members {
                sum = sum + self.values[k].clone();
            }
            let avg = sum / int::<S>(members.len() as i64);
            for k in members {
                out.values.insert(k.clone(), avg.clone());
            }
        }
        for cell in out.cells() {
            let prof = out.markings.profile(&cell)?;
            let normalized = prof.size == 0 || (prof.size == 1 && cell.entries()[0].1 == 0);
            if !normalized && prof.is_constrained() {
                out.resolve_pivot(&cell, &prof)?;
            }
        }
        Ok(out)
    }
}

/// One serialized chamber value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChamberEntry {
    #[serde(rename = "J")]
    pub j: Vec<u32>,
    pub d: BTreeMap<u32, u32>,
    pub p: u32,
    pub value: String,
}

/// Serialized chamber index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChamberDoc {
    pub r: u32,
    pub s: u32,
    pub markings: Vec<Marking>,
    pub dmax: BTreeMap<u32, u32>,
    pub entries: Vec<ChamberEntry>,
}

impl<S: ScalarText> ChamberIndex<S> {
    pub fn to_doc(&self) -> ChamberDoc {
        let params = self.params();
        ChamberDoc {
            r: params.r,
            s: params.s,
            markings: self.markings.markings(),
            dmax: self.markings.twists().keys().map(|&l| (l, uniform_or(&self.dmax, l))).collect(),
            entries: self
                .values
                .iter()
                .map(|(k, v)| ChamberEntry {
                    j: k.cell.labels().collect(),
                    d: k.cell.entries().iter().copied().collect(),
                    p: k.p,
                    value: v.to_text(),
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &ChamberDoc) -> Result<Self> {
        let params = ModelParams::new(doc.r, doc.s)?;
        let markings = MarkingSet::new(params, &doc.markings)?;
        let mut values = BTreeMap::new();
        for e in &doc.entries {
            let labels: BTreeSet<u32> = e.j.iter().copied().collect();
            let dkeys: BTreeSet<u32> = e.d.keys().copied().collect();
            if labels != dkeys || labels.len() != e.j.len() {
                return Err(Error::OutOfDomain(format!("entry J={:?} has descendents for {:?}", e.j, dkeys)));
            }
            let cell = Cell::new(e.d.iter().map(|(&l, &d)| (l, d)))?;
            let v = S::parse_text(&e.value).ok_or_else(|| Error::OutOfDomain(format!("bad rational {:?}", e.value)))?;
            if values.insert(BalancedKey { cell, p: e.p }, v).is_some() {
                return Err(Error::OutOfDomain(format!("duplicate entry J={:?} p={}", e.j, e.p)));
            }
        }
        Self::from_values(markings, doc.dmax.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn set(twists: &[(u32, u32)]) -> MarkingSet {
        let ms: Vec<Marking> = twists.iter().enumerate().map(|(i, &(a, b))| Marking { label: i as u32 + 1, a, b }).collect();
        MarkingSet::new(ModelParams::new(3, 3).unwrap(), &ms).unwrap()
    }

    fn uniform(ms: &MarkingSet, d: u32) -> BTreeMap<u32, u32> {
        ms.twists().keys().map(|&l| (l, d)).collect()
    }

    #[test]
    fn singleton_minimal_values() {
        let ms = set(&[(1, 1)]);
        let nu = ChamberIndex::<Rational>::build_minimal(ms.clone(), uniform(&ms, 1)).unwrap();
        let empty = Cell::empty();
        assert_eq!(nu.value(&BalancedKey { cell: empty.clone(), p: 0 }).unwrap(), int(-1));
        assert_eq!(nu.value(&BalancedKey { cell: empty, p: 1 }).unwrap(), int(-1));
        let c0 = Cell::new([(1, 0)]).unwrap();
        assert_eq!(nu.value(&BalancedKey { cell: c0, p: 0 }).unwrap(), int(1));
        let c1 = Cell::new([(1, 1)]).unwrap();
        assert_eq!(nu.value(&BalancedKey { cell: c1.clone(), p: 0 }).unwrap(), ratio(-3, 2));
        assert_eq!(nu.value(&BalancedKey { cell: c1.clone(), p: 1 }).unwrap(), int(0));
        assert_eq!(nu.amplitude(&c1).unwrap(), int(-1));
    }

    #[test]
    fn two_marking_amplitude() {
        let ms = set(&[(1, 1), (1, 1)]);
        let nu = ChamberIndex::<Rational>::build_minimal(ms.clone(), uniform(&ms, 0)).unwrap();
        let c = Cell::new([(1, 0), (2, 0)]).unwrap();
        assert_eq!(nu.amplitude(&c).unwrap(), int(1));
        assert_eq!(nu.amplitude_by_partitions(&c).unwrap(), int(1));
    }

    #[test]
    fn subset_recursion_matches_ordered_partitions() {
        let ms = set(&[(1, 1), (1, 1), (2, 2)]);
        let mut nu = ChamberIndex::<Rational>::build_minimal(ms.clone(), uniform(&ms, 1)).unwrap();
        let keys: Vec<BalancedKey> = nu.values().keys().cloned().collect();
        for (i, k) in keys.iter().enumerate() {
            nu.set(k, ratio(i as i64 % 7 - 3, 1 + i as i64 % 4)).unwrap();
        }
        for cell in nu.cells() {
            assert_eq!(nu.amplitude(&cell).unwrap(), nu.amplitude_by_partitions(&cell).unwrap(), "{cell}");
        }
    }

    #[test]
    fn minimal_passes_axioms_and_perturbation_fails() {
        let ms = set(&[(1, 1), (1, 1), (2, 2)]);
        let nu = ChamberIndex::<Rational>::build_minimal(ms.clone(), uniform(&ms, 1)).unwrap();
        assert!(nu.check_axioms().passed());
        assert!(nu.is_symmetric());
        assert_eq!(nu.symmetrize().unwrap(), nu);
        let key = BalancedKey { cell: Cell::new([(1, 1)]).unwrap(), p: 0 };
        let mut bad = nu.clone();
        bad.set(&key, nu.value(&key).unwrap() + int::<Rational>(1)).unwrap();
        let report = bad.check_axioms();
        assert!(!report.passed());
        assert!(report.violations.iter().any(|v| v.condition == Condition::Singleton && v.cell == key.cell));
    }

    #[test]
    fn symmetrize_repairs_asymmetric_values() {
        let ms = set(&[(1, 1), (1, 1)]);
        let mut nu = ChamberIndex::<Rational>::build_minimal(ms.clone(), uniform(&ms, 1)).unwrap();
        let free = BalancedKey { cell: Cell::new([(1, 1)]).unwrap(), p: 1 };
        nu.set(&free, int(4)).unwrap();
        let sym = nu.symmetrize().unwrap();
        assert!(sym.is_symmetric());
        assert!(sym.check_axioms().passed());
        assert_eq!(sym.value(&free).unwrap(), int(2));
    }

    #[test]
    fn doc_round_trip() {
        let ms = set(&[(1, 1), (2, 2)]);
        let nu = ChamberIndex::<Rational>::build_minimal(ms.clone(), uniform(&ms, 1)).unwrap();
        let doc = nu.to_doc();
        let text = serde_json::to_string(&doc).unwrap();
        let back: ChamberDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(ChamberIndex::<Rational>::from_doc(&back).unwrap(), nu);
    }
}
