use std::collections::BTreeMap;
use std::fmt;

/// Product `∏_{j∈J} u_{j,d_j}`: each marking label occurs at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UMonomial(BTreeMap<u32, u32>);

impl UMonomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(label: u32, descendent: u32) -> Self {
        Self(BTreeMap::from([(label, descendent)]))
    }

    /// Builds `u_{J,d}`; `None` if a label repeats (the product is zero).
    pub fn from_pairs<I: IntoIterator<Item = (u32, u32)>>(pairs: I) -> Option<Self> {
        let mut map = BTreeMap::new();
        for (label, d) in pairs {
            if map.insert(label, d).is_some() {
                return None;
            }
        }
        Some(Self(map))
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.keys().copied()
    }

    pub fn descendent(&self, label: u32) -> Option<u32> {
        self.0.get(&label).copied()
    }

    /// `(label, descendent)` pairs in ascending label order.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.0.iter().map(|(&l, &d)| (l, d))
    }

    /// Product in `A_I`; `None` when the supports share a label.
    pub fn mul(&self, other: &Self) -> Option<Self> {
        let (small, large) = if self.0.len() <= other.0.len() { (self, other) } else { (other, self) };
        let mut out = large.0.clone();
        for (&l, &d) in &small.0 {
            if out.insert(l, d).is_some() {
                return None;
            }
        }
        Some(Self(out))
    }
}

impl fmt::Display for UMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|(l, d)| format!("u[{l},{d}]")).collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// Index of a symmetric variable `t_{α,β,d}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TVar {
    pub alpha: u32,
    pub beta: u32,
    pub d: u32,
}

/// Multiset of `t` variables, stored as variable → multiplicity.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TMonomial(BTreeMap<TVar, u32>);

impl TMonomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(alpha: u32, beta: u32, d: u32) -> Self {
        Self(BTreeMap::from([(TVar { alpha, beta, d }, 1)]))
    }

    pub fn from_vars<I: IntoIterator<Item = TVar>>(vars: I) -> Self {
        let mut map = BTreeMap::new();
        for v in vars {
            *map.entry(v).or_insert(0) += 1;
        }
        Self(map)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn factors(&self) -> impl Iterator<Item = (TVar, u32)> + '_ {
        self.0.iter().map(|(&v, &n)| (v, n))
    }

    /// Flattened factor list, repeated by multiplicity, in lexicographic order.
    pub fn vars(&self) -> Vec<TVar> {
        self.0.iter().flat_map(|(&v, &n)| std::iter::repeat_n(v, n as usize)).collect()
    }

    /// Number of factors per twist fiber `(α,β)`.
    pub fn fiber_counts(&self) -> BTreeMap<(u32, u32), u32> {
        let mut out = BTreeMap::new();
        for (v, n) in &self.0 {
            *out.entry((v.alpha, v.beta)).or_insert(0) += n;
        }
        out
    }

    /// `|Aut(A)|` for the multiset `A` of factors: `∏ n_v!`.
    pub fn automorphisms(&self) -> u64 {
        self.0.values().map(|&n| (1..=n as u64).product::<u64>()).product()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.0.clone();
        for (&v, &n) in &other.0 {
            *out.entry(v).or_insert(0) += n;
        }
        Self(out)
    }

    /// True when some factor has positive descendent.
    pub fn has_positive_descendent(&self) -> bool {
        self.0.keys().any(|v| v.d > 0)
    }
}

impl fmt::Display for TMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(v, n)| {
                if *n == 1 {
                    format!("t[{},{},{}]", v.alpha, v.beta, v.d)
                } else {
                    format!("t[{},{},{}]^{n}", v.alpha, v.beta, v.d)
                }
            })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// Monomial of either coefficient ring.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Monomial {
    U(UMonomial),
    T(TMonomial),
}

impl Monomial {
    pub fn is_one(&self) -> bool {
        match self {
            Monomial::U(m) => m.is_one(),
            Monomial::T(m) => m.is_one(),
        }
    }

    /// Degree in the maximal ideal.
    pub fn degree(&self) -> u32 {
        match self {
            Monomial::U(m) => m.len() as u32,
            Monomial::T(m) => m.degree(),
        }
    }

    pub fn as_u(&self) -> Option<&UMonomial> {
        match self {
            Monomial::U(m) => Some(m),
            Monomial::T(_) => None,
        }
    }

    pub fn as_t(&self) -> Option<&TMonomial> {
        match self {
            Monomial::T(m) => Some(m),
            Monomial::U(_) => None,
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Monomial::U(m) => m.fmt(f),
            Monomial::T(m) => m.fmt(f),
        }
    }
}
