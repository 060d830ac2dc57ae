//! Twist combinatorics for `W = x^r + y^s`: profiles, balanced and critical
//! graph keys, rank formulas, closed selection rules, partitions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{int, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelParams {
    pub r: u32,
    pub s: u32,
}

impl ModelParams {
    pub fn new(r: u32, s: u32) -> Result<Self> {
        if r < 2 || s < 2 {
            return Err(Error::InvalidParams(format!("need r, s >= 2, got ({r}, {s})")));
        }
        Ok(Self { r, s })
    }

    pub fn rs(&self) -> i64 {
        self.r as i64 * self.s as i64
    }
}

/// An internal marking with an open-theory twist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Marking {
    pub label: u32,
    pub a: u32,
    pub b: u32,
}

/// A closed insertion `τ_d^{(a,b)}`; twists may be `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedInsertion {
    pub a: i32,
    pub b: i32,
    pub d: u32,
}

impl ClosedInsertion {
    pub fn new(a: i32, b: i32, d: u32) -> Self {
        Self { a, b, d }
    }
}

impl fmt::Display for ClosedInsertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tau_{}^({},{})", self.d, self.a, self.b)
    }
}

/// A pair `(J, 𝐝)`: sorted `(label, descendent)` entries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    entries: Vec<(u32, u32)>,
}

impl Cell {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Sorts by label; fails on a repeated label.
    pub fn new<I: IntoIterator<Item = (u32, u32)>>(entries: I) -> Result<Self> {
        let mut entries: Vec<(u32, u32)> = entries.into_iter().collect();
        entries.sort_unstable();
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidMarking("repeated label in cell".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn descendent(&self, label: u32) -> Option<u32> {
        self.entries.iter().find(|e| e.0 == label).map(|e| e.1)
    }

    /// Sub-cell picked by a bitmask over the entries.
    pub fn subcell(&self, mask: u64) -> Cell {
        Cell { entries: self.entries.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, e)| *e).collect() }
    }

    /// Same labels with descendent vector raised by one at `label`.
    pub fn bump(&self, label: u32) -> Option<Cell> {
        let mut out = self.clone();
        out.entries.iter_mut().find(|e| e.0 == label)?.1 += 1;
        Some(out)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|(l, d)| format!("{l}:{d}")).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Numeric data of a cell `(J, 𝐝)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TwistProfile {
    pub r: u32,
    pub s: u32,
    pub size: u32,
    pub r_j: u32,
    pub s_j: u32,
    pub ell1: u32,
    pub ell2: u32,
    pub m: i64,
    pub d_j: i64,
    pub n: i64,
}

/// Profile of twists `(a_i, b_i)` with descendents `d_i`.
pub fn twist_profile<I: IntoIterator<Item = (u32, u32, u32)>>(params: ModelParams, entries: I) -> TwistProfile {
    let (r, s) = (params.r as i64, params.s as i64);
    let rs = r * s;
    let (mut sa, mut sb, mut sd, mut size, mut m) = (0i64, 0i64, 0i64, 0u32, rs);
    for (a, b, d) in entries {
        sa += a as i64;
        sb += b as i64;
        sd += d as i64;
        size += 1;
        m += s * a as i64 + r * b as i64 + rs * (d as i64 - 1);
    }
    let r_j = sa.rem_euclid(r);
    let s_j = sb.rem_euclid(s);
    let ell1 = (sa - r_j) / r;
    let ell2 = (sb - s_j) / s;
    let num = s * r_j + r * s_j - m;
    debug_assert_eq!(num.rem_euclid(rs), 0);
    let d_j = num / rs - 1;
    let n = ell1 + ell2 - size as i64 + 1 + sd;
    debug_assert_eq!(n, -d_j - 1);
    TwistProfile {
        r: params.r,
        s: params.s,
        size,
        r_j: r_j as u32,
        s_j: s_j as u32,
        ell1: ell1 as u32,
        ell2: ell2 as u32,
        m,
        d_j,
        n,
    }
}

impl TwistProfile {
    /// `(p, k1, k2)` of the balanced graphs `Γ_{J,p}`, `p = 0..N`.
    pub fn balanced_exponents(&self) -> Vec<(u32, u32, u32)> {
        if self.n < 0 {
            return Vec::new();
        }
        let n = self.n as u32;
        (0..=n).map(|p| (p, self.r_j + p * self.r, self.s_j + (n - p) * self.s)).collect()
    }

    /// `(p, k1, k2)` of the critical graphs `Λ_{J,p}`, `p = 1..N`.
    pub fn critical_exponents(&self) -> Vec<(u32, u32, u32)> {
        if self.n < 1 {
            return Vec::new();
        }
        let n = self.n as u32;
        (1..=n).map(|p| (p, self.r_j + (p - 1) * self.r + 1, self.s_j + (n - p) * self.s + 1)).collect()
    }

    /// Whether the chamber axioms constrain the amplitude of this cell.
    pub fn is_constrained(&self) -> bool {
        match self.size {
            0 => false,
            1 => true,
            _ => self.n >= 0,
        }
    }
}

/// Balanced graph `Γ_{J,p}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BalancedKey {
    pub cell: Cell,
    pub p: u32,
}

/// Critical graph `Λ_{J,p}`, `p ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CriticalKey {
    pub cell: Cell,
    pub p: u32,
}

/// A validated set of internal markings.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MarkingSet {
    params: ModelParams,
    twists: BTreeMap<u32, (u32, u32)>,
}

impl MarkingSet {
    pub fn new(params: ModelParams, markings: &[Marking]) -> Result<Self> {
        let mut twists = BTreeMap::new();
        for m in markings {
            if m.label == 0 {
                return Err(Error::InvalidMarking("labels must be positive".into()));
            }
            if m.a >= params.r || m.b >= params.s {
                return Err(Error::InvalidMarking(format!(
                    "marking {} has twist ({},{}) outside 0..{} x 0..{}",
                    m.label,
                    m.a,
                    m.b,
                    params.r - 1,
                    params.s - 1
                )));
            }
            if twists.insert(m.label, (m.a, m.b)).is_some() {
                return Err(Error::InvalidMarking(format!("duplicate label {}", m.label)));
            }
        }
        Ok(Self { params, twists })
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn twists(&self) -> &BTreeMap<u32, (u32, u32)> {
        &self.twists
    }

    pub fn markings(&self) -> Vec<Marking> {
        self.twists.iter().map(|(&label, &(a, b))| Marking { label, a, b }).collect()
    }

    pub fn len(&self) -> usize {
        self.twists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.twists.is_empty()
    }

    pub fn twist(&self, label: u32) -> Option<(u32, u32)> {
        self.twists.get(&label).copied()
    }

    /// Fresh label: one more than the largest in use.
    pub fn fresh_label(&self) -> u32 {
        self.twists.keys().next_back().map_or(1, |l| l + 1)
    }

    pub fn profile(&self, cell: &Cell) -> Result<TwistProfile> {
        let mut entries = Vec::with_capacity(cell.len());
        for &(label, d) in cell.entries() {
            let (a, b) = self.twist(label).ok_or_else(|| Error::OutOfDomain(format!("unknown label {label}")))?;
            entries.push((a, b, d));
        }
        Ok(twist_profile(self.params, entries))
    }

    pub fn balanced_keys(&self, cell: &Cell) -> Result<Vec<BalancedKey>> {
        Ok(self
            .profile(cell)?
            .balanced_exponents()
            .into_iter()
            .map(|(p, _, _)| BalancedKey { cell: cell.clone(), p })
            .collect())
    }

    pub fn critical_keys(&self, cell: &Cell) -> Result<Vec<CriticalKey>> {
        Ok(self
            .profile(cell)?
            .critical_exponents()
            .into_iter()
            .map(|(p, _, _)| CriticalKey { cell: cell.clone(), p })
            .collect())
    }

    /// `(k1, k2)` of a balanced key.
    pub fn balanced_exponent(&self, key: &BalancedKey) -> Result<(u32, u32)> {
        let prof = self.profile(&key.cell)?;
        prof.balanced_exponents()
            .into_iter()
            .find(|e| e.0 == key.p)
            .map(|e| (e.1, e.2))
            .ok_or_else(|| Error::OutOfDomain(format!("no balanced graph p={} on {}", key.p, key.cell)))
    }

    /// `(k1, k2)` of a critical key.
    pub fn critical_exponent(&self, key: &CriticalKey) -> Result<(u32, u32)> {
        let prof = self.profile(&key.cell)?;
        prof.critical_exponents()
            .into_iter()
            .find(|e| e.0 == key.p)
            .map(|e| (e.1, e.2))
            .ok_or_else(|| Error::InvalidCriticalKey(format!("p={} out of range 1..={} on {}", key.p, prof.n, key.cell)))
    }

    /// Every cell `(J, 𝐝)` with `J ⊆ I` and `d_i ≤ dmax_i`, ordered by
    /// `|J|`, then labels, then descendents.
    pub fn cells(&self, dmax: &BTreeMap<u32, u32>) -> Vec<Cell> {
        let labels: Vec<u32> = self.twists.keys().copied().collect();
        let mut out = Vec::new();
        for mask in 0u64..(1u64 << labels.len()) {
            let chosen: Vec<u32> = labels.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &l)| l).collect();
            let mut ds = vec![0u32; chosen.len()];
            loop {
                out.push(Cell { entries: chosen.iter().copied().zip(ds.iter().copied()).collect() });
                let mut i = 0;
                loop {
                    if i == ds.len() {
                        break;
                    }
                    if ds[i] < dmax.get(&chosen[i]).copied().unwrap_or(0) {
                        ds[i] += 1;
                        break;
                    }
                    ds[i] = 0;
                    i += 1;
                }
                if i == ds.len() {
                    break;
                }
            }
        }
        out.sort_by(|a, b| (a.len(), a.labels().collect::<Vec<_>>(), a).cmp(&(b.len(), b.labels().collect::<Vec<_>>(), b)));
        out
    }
}

/// Outcome of the open rank formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankOutcome {
    Ranks(i64, i64),
    NonIntegral,
}

/// `e1 = (2Σa + (k1+k12−1)(r−2))/r`, `e2 = (2Σb + (k2+k12−1)(s−2))/s`.
pub fn open_witten_ranks(params: ModelParams, k1: u32, k2: u32, k12: u32, twists: &[(u32, u32)]) -> RankOutcome {
    let (r, s) = (params.r as i64, params.s as i64);
    let sa: i64 = twists.iter().map(|t| t.0 as i64).sum();
    let sb: i64 = twists.iter().map(|t| t.1 as i64).sum();
    let n1 = 2 * sa + (k1 as i64 + k12 as i64 - 1) * (r - 2);
    let n2 = 2 * sb + (k2 as i64 + k12 as i64 - 1) * (s - 2);
    if n1.rem_euclid(r) != 0 || n2.rem_euclid(s) != 0 {
        return RankOutcome::NonIntegral;
    }
    RankOutcome::Ranks(n1 / r, n2 / s)
}

/// When insertions without `-1` twists but with a Ramond twist force zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RamondRule {
    /// A coordinate with some twist `r−1` (resp. `s−1`) and no `-1` vanishes.
    #[default]
    PerCoordinate,
    /// Vanishing only when no insertion has a `-1` in either coordinate.
    Global,
}

/// Selection-rule outcome for a closed extended invariant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    TooFewPoints,
    NonIntegralRank,
    DimensionMismatch,
    RamondVanishing,
    Ok { e1: i64, e2: i64 },
}

impl Selection {
    pub fn forces_zero(&self) -> bool {
        !matches!(self, Selection::Ok { .. })
    }
}

pub fn closed_selection(params: ModelParams, insertions: &[ClosedInsertion]) -> Result<Selection> {
    closed_selection_with(params, insertions, RamondRule::default())
}

pub fn closed_selection_with(params: ModelParams, insertions: &[ClosedInsertion], rule: RamondRule) -> Result<Selection> {
    let (r, s) = (params.r as i32, params.s as i32);
    for ins in insertions {
        if ins.a < -1 || ins.a >= r || ins.b < -1 || ins.b >= s {
            return Err(Error::InvalidMarking(format!("closed insertion {ins} out of range")));
        }
    }
    let neg_a = insertions.iter().filter(|i| i.a == -1).count();
    let neg_b = insertions.iter().filter(|i| i.b == -1).count();
    if neg_a > 1 || neg_b > 1 {
        return Err(Error::DoubleNegative);
    }
    if insertions.len() < 3 {
        return Ok(Selection::TooFewPoints);
    }
    let sa: i64 = insertions.iter().map(|i| i.a as i64).sum();
    let sb: i64 = insertions.iter().map(|i| i.b as i64).sum();
    let sd: i64 = insertions.iter().map(|i| i.d as i64).sum();
    let n1 = sa - (r as i64 - 2);
    let n2 = sb - (s as i64 - 2);
    if n1.rem_euclid(r as i64) != 0 || n2.rem_euclid(s as i64) != 0 {
        return Ok(Selection::NonIntegralRank);
    }
    let (e1, e2) = (n1 / r as i64, n2 / s as i64);
    if insertions.len() as i64 - 3 != e1 + e2 + sd {
        return Ok(Selection::DimensionMismatch);
    }
    let ramond_a = insertions.iter().any(|i| i.a == r - 1);
    let ramond_b = insertions.iter().any(|i| i.b == s - 1);
    let vanish = match rule {
        RamondRule::PerCoordinate => (ramond_a && neg_a == 0) || (ramond_b && neg_b == 0),
        RamondRule::Global => neg_a == 0 && neg_b == 0 && (ramond_a || ramond_b),
    };
    if vanish {
        return Ok(Selection::RamondVanishing);
    }
    Ok(Selection::Ok { e1, e2 })
}

/// Rising factorial `Γ(c+n)/Γ(c) = ∏_{q<n} (c+q)`.
pub fn gamma_ratio<S: Scalar>(c: &S, n: u32) -> S {
    let mut acc = S::one();
    for q in 0..n {
        acc = acc * (c.clone() + int::<S>(q as i64));
    }
    acc
}

/// Iterator over ordered set partitions of `items` into exactly `h`
/// non-empty blocks; each block keeps the input order.
pub fn ordered_partitions<T: Clone>(items: &[T], h: usize) -> OrderedPartitions<T> {
    let n = items.len();
    let done = h == 0 || h > n;
    OrderedPartitions { items: items.to_vec(), h, assignment: vec![0; n], done }
}

pub struct OrderedPartitions<T> {
    items: Vec<T>,
    h: usize,
    assignment: Vec<usize>,
    done: bool,
}

impl<T: Clone> OrderedPartitions<T> {
    fn advance(&mut self) -> bool {
        for slot in self.assignment.iter_mut() {
            *slot += 1;
            if *slot < self.h {
                return true;
            }
            *slot = 0;
        }
        false
    }

    fn is_surjective(&self) -> bool {
        let mut seen = vec![false; self.h];
        for &b in &self.assignment {
            seen[b] = true;
        }
        seen.into_iter().all(|x| x)
    }
}

impl<T: Clone> Iterator for OrderedPartitions<T> {
    type Item = Vec<Vec<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let hit = self.is_surjective();
            let current = hit.then(|| {
                let mut blocks = vec![Vec::new(); self.h];
                for (item, &b) in self.items.iter().zip(&self.assignment) {
                    blocks[b].push(item.clone());
                }
                blocks
            });
            if !self.advance() {
                self.done = true;
            }
            if current.is_some() {
                return current;
            }
        }
        None
    }
}
