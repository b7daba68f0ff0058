//! Enumerable sample spaces, exact probability mass functions, planted
//! parity families on the hypercube, product powers, and the combinatorial
//! moment structure used by the correlation-condition evaluator.

use crate::error::{Error, Result};
use crate::util::{binomial_u128, neumaier_sum, Combinations};

/// Hard cap on materialized atoms for exact product spaces.
pub const ATOM_BUDGET: u64 = 1 << 20;

/// Absolute tolerance for probability normalization and exactness checks.
pub const MASS_TOL: f64 = 1e-12;

/// Default cap on the number of collections visited by exhaustive counting.
pub const ENUM_BUDGET: u64 = 10_000_000;

const MAX_BINARY_DIM: usize = 20;

/// Identity of a finite sample space: either the hypercube `{-1,+1}^d`
/// with atoms indexed by the little-endian bit encoding (+1 -> 1, -1 -> 0),
/// or an opaque finite set of a given size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    Binary { d: usize },
    Abstract { size: usize },
}

impl SpaceKind {
    pub fn size(&self) -> usize {
        match *self {
            SpaceKind::Binary { d } => 1usize << d,
            SpaceKind::Abstract { size } => size,
        }
    }

    pub fn binary_dim(&self) -> Option<usize> {
        match *self {
            SpaceKind::Binary { d } => Some(d),
            SpaceKind::Abstract { .. } => None,
        }
    }
}

/// The hypercube `{-1,+1}^d` in enumeration mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BinarySpace {
    d: usize,
}

impl BinarySpace {
    pub fn new(d: usize) -> Result<Self> {
        if d < 1 || d > MAX_BINARY_DIM {
            return Err(Error::DimensionOutOfRange {
                d,
                max: MAX_BINARY_DIM,
            });
        }
        Ok(BinarySpace { d })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn size(&self) -> usize {
        1usize << self.d
    }

    pub fn kind(&self) -> SpaceKind {
        SpaceKind::Binary { d: self.d }
    }

    /// Atom for an index: coordinate `i` is +1 when bit `i` of `index` is set.
    pub fn atom(&self, index: usize) -> Vec<i8> {
        atom_coords(self.d, index)
    }

    pub fn index(&self, atom: &[i8]) -> usize {
        debug_assert_eq!(atom.len(), self.d);
        atom.iter()
            .enumerate()
            .fold(0usize, |acc, (i, &c)| acc | (usize::from(c > 0) << i))
    }

    pub fn atoms(&self) -> impl Iterator<Item = Vec<i8>> + '_ {
        (0..self.size()).map(move |i| self.atom(i))
    }
}

/// Coordinates of the atom with the given little-endian index.
pub fn atom_coords(d: usize, index: usize) -> Vec<i8> {
    (0..d)
        .map(|i| if index >> i & 1 == 1 { 1 } else { -1 })
        .collect()
}

/// Product of the +-1 coordinates of `index` over the subset `coords`.
pub fn monomial_at(index: usize, coords: &[usize]) -> i8 {
    let mut sign = 1i8;
    for &c in coords {
        if index >> c & 1 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// An exact probability mass function over an enumerable space.
#[derive(Clone, Debug)]
pub struct Pmf {
    kind: SpaceKind,
    mass: Vec<f64>,
}

impl Pmf {
    /// Builds a pmf, checking length, nonnegativity, and normalization
    /// to within [`MASS_TOL`].
    pub fn new(kind: SpaceKind, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != kind.size() {
            return Err(Error::MassLengthMismatch {
                len: mass.len(),
                size: kind.size(),
            });
        }
        for (index, &m) in mass.iter().enumerate() {
            if m < 0.0 || !m.is_finite() {
                return Err(Error::NegativeMass { index, mass: m });
            }
        }
        let total = neumaier_sum(mass.iter().copied());
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::MassNotNormalized {
                total,
                tol: MASS_TOL,
            });
        }
        Ok(Pmf { kind, mass })
    }

    pub fn uniform(kind: SpaceKind) -> Self {
        let n = kind.size();
        Pmf {
            kind,
            mass: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(kind: SpaceKind, index: usize) -> Result<Self> {
        if index >= kind.size() {
            return Err(Error::IndexOutOfRange {
                index,
                d: kind.size(),
            });
        }
        let mut mass = vec![0.0; kind.size()];
        mass[index] = 1.0;
        Ok(Pmf { kind, mass })
    }

    /// Distribution of a single +-1 coordinate with `Pr[+1] = p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ArgOutOfRange {
                name: "p",
                value: p,
                expected: "[0, 1]",
            });
        }
        Ok(Pmf {
            kind: SpaceKind::Binary { d: 1 },
            mass: vec![1.0 - p, p],
        })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.mass[index]
    }

    pub fn same_space(&self, other: &Pmf) -> bool {
        self.kind == other.kind
    }

    pub fn total(&self) -> f64 {
        neumaier_sum(self.mass.iter().copied())
    }
}

/// A validated collection of distinct nonempty coordinate subsets of `0..d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetCollection {
    d: usize,
    members: Vec<Vec<usize>>,
}

impl SubsetCollection {
    /// Normalizes each member to sorted order and rejects empty, duplicate,
    /// or out-of-range subsets.
    pub fn new(d: usize, members: Vec<Vec<usize>>) -> Result<Self> {
        let mut normalized = Vec::with_capacity(members.len());
        for member in members {
            normalized.push(normalize_subset(d, &member)?);
        }
        let mut seen = normalized.clone();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DuplicateSubset);
        }
        Ok(SubsetCollection {
            d,
            members: normalized,
        })
    }

    /// All pairs `{i, j}` with `i < j`, in lexicographic order.
    pub fn all_pairs(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimensionOutOfRange { d, max: 2 });
        }
        let mut members = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                members.push(vec![i, j]);
            }
        }
        SubsetCollection::new(d, members)
    }

    /// All singletons `{i}` in coordinate order.
    pub fn singletons(d: usize) -> Result<Self> {
        SubsetCollection::new(d, (0..d).map(|i| vec![i]).collect())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn normalize_subset(d: usize, subset: &[usize]) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut s = subset.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() != subset.len() {
        return Err(Error::DuplicateSubset);
    }
    if let Some(&max) = s.last() {
        if max >= d {
            return Err(Error::IndexOutOfRange { index: max, d });
        }
    }
    Ok(s)
}

/// A base distribution plus `k` alternatives whose densities deviate from
/// the base by at most a `(1 +- rho)` multiplicative factor on every atom.
#[derive(Clone, Debug)]
pub struct CenteredFamily {
    base: Pmf,
    alternatives: Vec<Pmf>,
    rho: f64,
    labels: Option<Vec<Vec<usize>>>,
}

impl CenteredFamily {
    /// Validates shared space, full-support base, the atomwise centering
    /// radius, and label arity.
    pub fn new(
        base: Pmf,
        alternatives: Vec<Pmf>,
        rho: f64,
        labels: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        if alternatives.is_empty() {
            return Err(Error::TooFewHypotheses { got: 0, min: 1 });
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::ArgOutOfRange {
                name: "rho",
                value: rho,
                expected: "(0, 1)",
            });
        }
        if let Some(ref l) = labels {
            if l.len() != alternatives.len() {
                return Err(Error::Internal {
                    detail: format!(
                        "label count {} does not match alternative count {}",
                        l.len(),
                        alternatives.len()
                    ),
                });
            }
        }
        for (index, &m) in base.mass().iter().enumerate() {
            if m <= 0.0 {
                return Err(Error::ZeroBaseMass { index });
            }
        }
        for (i, alt) in alternatives.iter().enumerate() {
            if !alt.same_space(&base) {
                return Err(Error::SpaceMismatch);
            }
            for (index, (&a, &b)) in alt.mass().iter().zip(base.mass()).enumerate() {
                let deviation = (a / b - 1.0).abs();
                if deviation > rho + MASS_TOL {
                    return Err(Error::NotCentered {
                        i,
                        index,
                        deviation,
                        rho,
                    });
                }
            }
        }
        Ok(CenteredFamily {
            base,
            alternatives,
            rho,
            labels,
        })
    }

    pub fn k(&self) -> usize {
        self.alternatives.len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn base(&self) -> &Pmf {
        &self.base
    }

    pub fn alternative(&self, i: usize) -> &Pmf {
        &self.alternatives[i]
    }

    pub fn alternatives(&self) -> &[Pmf] {
        &self.alternatives
    }

    pub fn labels(&self) -> Option<&[Vec<usize>]> {
        self.labels.as_deref()
    }

    pub fn space_kind(&self) -> SpaceKind {
        self.base.kind()
    }

    /// Density ratio `alt_i(x) / base(x)` at one atom.
    pub fn ratio(&self, i: usize, index: usize) -> f64 {
        self.alternatives[i].prob(index) / self.base.prob(index)
    }

    /// Largest atomwise deviation `|ratio - 1|` over all alternatives.
    pub fn max_centering_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.k() {
            for index in 0..self.base.len() {
                worst = worst.max((self.ratio(i, index) - 1.0).abs());
            }
        }
        worst
    }
}

/// The planted-parity distribution assigning `2^-d (1 + rho * prod_{i in I} x_i)`
/// to each atom of `{-1,+1}^d`.
pub fn parity_pmf(subset: &[usize], rho: f64, d: usize) -> Result<Pmf> {
    let space = BinarySpace::new(d)?;
    let subset = normalize_subset(d, subset)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::ArgOutOfRange {
            name: "rho",
            value: rho,
            expected: "(0, 1)",
        });
    }
    let scale = 1.0 / space.size() as f64;
    let mass = (0..space.size())
        .map(|idx| scale * (1.0 + rho * f64::from(monomial_at(idx, &subset))))
        .collect();
    Pmf::new(space.kind(), mass)
}

/// Builds the family of parity distributions for every member of `u` over a
/// uniform base, preserving member order as labels.
pub fn build_parity_family(u: &SubsetCollection, rho: f64, d: usize) -> Result<CenteredFamily> {
    if u.len() < 2 {
        return Err(Error::TooFewHypotheses {
            got: u.len(),
            min: 2,
        });
    }
    if u.d() != d {
        return Err(Error::SpaceMismatch);
    }
    let space = BinarySpace::new(d)?;
    let base = Pmf::uniform(space.kind());
    let alternatives = u
        .members()
        .iter()
        .map(|m| parity_pmf(m, rho, d))
        .collect::<Result<Vec<_>>>()?;
    CenteredFamily::new(base, alternatives, rho, Some(u.members().to_vec()))
}

/// `E_{X ~ p} prod_{i in I'} X_i` by exact summation over atoms.
pub fn expected_monomial(p: &Pmf, iprime: &[usize]) -> Result<f64> {
    let d = p.kind().binary_dim().ok_or(Error::SpaceMismatch)?;
    let iprime = normalize_subset(d, iprime)?;
    Ok(neumaier_sum((0..p.len()).map(|idx| {
        p.prob(idx) * f64::from(monomial_at(idx, &iprime))
    })))
}

/// Coordinates appearing in an odd number of the given subsets.
pub fn symmetric_difference(subsets: &[Vec<usize>]) -> Vec<usize> {
    let mut counts = std::collections::BTreeMap::new();
    for subset in subsets {
        for &c in subset {
            *counts.entry(c).or_insert(0usize) += 1;
        }
    }
    counts
        .into_iter()
        .filter(|&(_, n)| n % 2 == 1)
        .map(|(c, _)| c)
        .collect()
}

fn check_members(family: &CenteredFamily, members: &[usize]) -> Result<()> {
    let mut seen = members.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != members.len() {
        return Err(Error::DuplicateSubset);
    }
    for &i in members {
        if i >= family.k() {
            return Err(Error::HypothesisOutOfRange {
                index: i,
                k: family.k(),
            });
        }
    }
    Ok(())
}

/// Brute-force `E_{A ~ base} prod_{i in J} B_i` where
/// `B_i = (alt_i(A)/base(A) - 1)/rho`, by exact summation.
pub fn collection_moment_brute(family: &CenteredFamily, members: &[usize]) -> Result<f64> {
    check_members(family, members)?;
    let rho = family.rho();
    Ok(neumaier_sum((0..family.base().len()).map(|idx| {
        let mut prod = family.base().prob(idx);
        for &i in members {
            prod *= (family.ratio(i, idx) - 1.0) / rho;
        }
        prod
    })))
}

/// Fast-path collection moment for parity families: 1 when the symmetric
/// difference of the member labels is empty, 0 otherwise.
pub fn collection_moment_fast(family: &CenteredFamily, members: &[usize]) -> Result<f64> {
    check_members(family, members)?;
    let labels = family.labels().ok_or(Error::NotParityFamily)?;
    let chosen: Vec<Vec<usize>> = members.iter().map(|&i| labels[i].clone()).collect();
    Ok(if symmetric_difference(&chosen).is_empty() {
        1.0
    } else {
        0.0
    })
}

/// Collection moment `E prod_{i in J} B_i`; uses the parity fast path when
/// labels are present and cross-checks it against brute-force summation.
pub fn collection_moment(family: &CenteredFamily, members: &[usize]) -> Result<f64> {
    let brute = collection_moment_brute(family, members)?;
    match collection_moment_fast(family, members) {
        Ok(fast) => {
            if (fast - brute).abs() > MASS_TOL {
                return Err(Error::CollectionMomentMismatch {
                    fast,
                    brute,
                    tol: MASS_TOL,
                });
            }
            Ok(fast)
        }
        Err(Error::NotParityFamily) => Ok(brute),
        Err(e) => Err(e),
    }
}

/// Exhaustively counts collections of `l` distinct r-subsets of `0..d` whose
/// symmetric difference is empty, i.e. every element of `0..d` is covered by
/// an even number of members. Such collections are exactly the ones whose
/// collection moment survives under parity families, and the count is zero
/// whenever `l * r` is odd since total coverage has odd parity.
pub fn count_closed_collections(d: usize, r: usize, l: usize) -> Result<u64> {
    count_closed_collections_with_budget(d, r, l, ENUM_BUDGET)
}

/// As [`count_closed_collections`] with an explicit enumeration budget.
pub fn count_closed_collections_with_budget(
    d: usize,
    r: usize,
    l: usize,
    budget: u64,
) -> Result<u64> {
    if r < 2 || r > d {
        return Err(Error::ArgOutOfRange {
            name: "r",
            value: r as f64,
            expected: "2..=d",
        });
    }
    if l < 2 {
        return Err(Error::ArgOutOfRange {
            name: "l",
            value: l as f64,
            expected: ">= 2",
        });
    }
    let num_subsets = binomial_u128(d as u128, r as u128).unwrap_or(u128::MAX);
    let required = binomial_u128(num_subsets, l as u128).unwrap_or(u128::MAX);
    if required > u128::from(budget) {
        return Err(Error::EnumerationBudgetExceeded { required, budget });
    }
    let subsets: Vec<Vec<usize>> = Combinations::new(d, r).collect();
    let mut count = 0u64;
    let mut member_counts = vec![0u32; d];
    for combo in Combinations::new(subsets.len(), l) {
        member_counts.iter_mut().for_each(|c| *c = 0);
        for &s in &combo {
            for &c in &subsets[s] {
                member_counts[c] += 1;
            }
        }
        if member_counts.iter().all(|&c| c % 2 == 0) {
            count += 1;
        }
    }
    Ok(count)
}

/// Closed-form bound `d^(lr/2) * (1/(lr/2)!) * binom(binom(lr/2, r), l)` on
/// the closed-collection count; 0 when `l*r` is odd.
pub fn tuples_bound(d: usize, r: usize, l: usize) -> f64 {
    if (l * r) % 2 == 1 {
        return 0.0;
    }
    let h = l * r / 2;
    let inner = binomial_u128(h as u128, r as u128).unwrap_or(0);
    let outer = binomial_u128(inner, l as u128).unwrap_or(0);
    let mut factorial = 1.0f64;
    for i in 1..=h {
        factorial *= i as f64;
    }
    (d as f64).powi(h as i32) / factorial * outer as f64
}

/// Exact product distribution of `n` i.i.d. copies of `p`. Sample `j`
/// occupies the `j`-th block of the combined index (stride `|space|^j`).
pub fn power_pmf(p: &Pmf, n: usize) -> Result<Pmf> {
    if n < 1 {
        return Err(Error::ArgOutOfRange {
            name: "n",
            value: n as f64,
            expected: ">= 1",
        });
    }
    let m = p.len();
    let required = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if required > u128::from(ATOM_BUDGET) {
        return Err(Error::AtomBudgetExceeded {
            required,
            budget: ATOM_BUDGET,
        });
    }
    if n == 1 {
        return Ok(p.clone());
    }
    let kind = match p.kind() {
        SpaceKind::Binary { d } => SpaceKind::Binary { d: d * n },
        SpaceKind::Abstract { size } => SpaceKind::Abstract {
            size: size.pow(n as u32),
        },
    };
    // Combined index: sample j contributes idx_j * |space|^j, so each new
    // factor becomes the most significant block.
    let mut mass = vec![1.0f64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(mass.len() * m);
        for &factor in p.mass() {
            next.extend(mass.iter().map(|&v| v * factor));
        }
        mass = next;
    }
    Pmf::new(kind, mass)
}

/// Partial sum, over subsets `S` of hypotheses with `2 <= |S| <= max_order`,
/// of `n^(-|S|/2) rho^(-|S|) |E_{A ~ base} prod_{i in S}(ratio_i(A) - 1)|`.
/// For parity families each term reduces exactly to `n^(-|S|/2)` times the
/// indicator of an empty symmetric difference.
pub fn correlation_condition_lhs(family: &CenteredFamily, n: u64, max_order: usize) -> Result<f64> {
    let k = family.k();
    if max_order < 2 || max_order > k {
        return Err(Error::ArgOutOfRange {
            name: "max_order",
            value: max_order as f64,
            expected: "2..=k",
        });
    }
    if n < 1 {
        return Err(Error::ArgOutOfRange {
            name: "n",
            value: n as f64,
            expected: ">= 1",
        });
    }
    let sqrt_n = (n as f64).sqrt();
    let rho = family.rho();
    let mut terms = Vec::new();
    for order in 2..=max_order {
        for combo in Combinations::new(k, order) {
            let term = if let Some(labels) = family.labels() {
                let chosen: Vec<Vec<usize>> = combo.iter().map(|&i| labels[i].clone()).collect();
                if symmetric_difference(&chosen).is_empty() {
                    sqrt_n.powi(-(order as i32))
                } else {
                    0.0
                }
            } else {
                let e = neumaier_sum((0..family.base().len()).map(|idx| {
                    let mut prod = family.base().prob(idx);
                    for &i in &combo {
                        prod *= family.ratio(i, idx) - 1.0;
                    }
                    prod
                }));
                sqrt_n.powi(-(order as i32)) * rho.powi(-(order as i32)) * e.abs()
            };
            terms.push(term);
        }
    }
    Ok(neumaier_sum(terms))
}

/// Scale-free diagnostic `rho * sqrt(n * ln k)` for callers that gate the
/// correlation condition with their own constant.
pub fn correlation_gate_diagnostic(family: &CenteredFamily, n: u64) -> f64 {
    family.rho() * ((n as f64) * (family.k() as f64).ln()).sqrt()
}

/// Tail sum `sum_{r = order+1}^{k} k^r n^(-r/2) / r!`, valid (and at most
/// `1/(2n)`) once `n >= k^(2(order+1)/(order-1))`.
pub fn corr_tail_bound(k: usize, n: u64, order: usize) -> Result<f64> {
    if order < 2 {
        return Err(Error::ArgOutOfRange {
            name: "order",
            value: order as f64,
            expected: ">= 2",
        });
    }
    let required_n = (k as f64).powf(2.0 * (order as f64 + 1.0) / (order as f64 - 1.0));
    if (n as f64) < required_n {
        return Err(Error::TailBoundPrecondition { required_n, n });
    }
    let ln_k = (k as f64).ln();
    let ln_n = (n as f64).ln();
    let mut ln_rfact = 0.0f64;
    for r in 1..=order {
        ln_rfact += (r as f64).ln();
    }
    let mut terms = Vec::new();
    for r in order + 1..=k {
        ln_rfact += (r as f64).ln();
        terms.push((r as f64 * ln_k - r as f64 / 2.0 * ln_n - ln_rfact).exp());
    }
    let value = neumaier_sum(terms);
    let cap = 1.0 / (2.0 * n as f64);
    if value > cap * (1.0 + 1e-9) {
        return Err(Error::Internal {
            detail: format!("tail sum {value} exceeds {cap}"),
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf_close(p: &Pmf, expected: &[f64]) {
        for (a, b) in p.mass().iter().zip(expected) {
            assert!((a - b).abs() <= MASS_TOL, "{a} vs {b}");
        }
    }

    #[test]
    fn binary_space_round_trip() {
        let space = BinarySpace::new(3).unwrap();
        assert_eq!(space.size(), 8);
        assert_eq!(space.atom(0), vec![-1, -1, -1]);
        assert_eq!(space.atom(5), vec![1, -1, 1]);
        for idx in 0..space.size() {
            assert_eq!(space.index(&space.atom(idx)), idx);
        }
        assert!(BinarySpace::new(0).is_err());
        assert!(BinarySpace::new(21).is_err());
    }

    #[test]
    fn parity_pmf_matches_direct_substitution() {
        let p = parity_pmf(&[0, 1], 0.5, 2).unwrap();
        let idx = BinarySpace::new(2).unwrap().index(&[1, 1]);
        assert!((p.prob(idx) - 0.375).abs() <= MASS_TOL);

        let p = parity_pmf(&[0, 2], 0.2, 3).unwrap();
        let idx = BinarySpace::new(3).unwrap().index(&[1, -1, -1]);
        assert!((p.prob(idx) - 0.1).abs() <= MASS_TOL);
    }

    #[test]
    fn parity_pmf_normalizes() {
        for (subset, rho, d) in [
            (vec![0usize], 0.9, 4usize),
            (vec![1, 3], 0.01, 5),
            (vec![0, 1, 2], 0.5, 3),
        ] {
            let p = parity_pmf(&subset, rho, d).unwrap();
            assert!((p.total() - 1.0).abs() <= MASS_TOL);
        }
    }

    #[test]
    fn parity_pmf_rejects_bad_input() {
        assert!(parity_pmf(&[], 0.5, 2).is_err());
        assert!(parity_pmf(&[0], 0.0, 2).is_err());
        assert!(parity_pmf(&[0], 1.0, 2).is_err());
        assert!(parity_pmf(&[3], 0.5, 2).is_err());
    }

    #[test]
    fn parity_family_shape_and_radius() {
        let u = SubsetCollection::all_pairs(4).unwrap();
        let family = build_parity_family(&u, 0.1, 4).unwrap();
        assert_eq!(family.k(), 6);
        pmf_close(family.base(), &vec![1.0 / 16.0; 16]);
        assert!((family.max_centering_deviation() - 0.1).abs() <= MASS_TOL);

        let u = SubsetCollection::new(2, vec![vec![0], vec![1]]).unwrap();
        let family = build_parity_family(&u, 0.01, 2).unwrap();
        assert_eq!(family.k(), 2);

        let single = SubsetCollection::new(2, vec![vec![0]]).unwrap();
        assert!(build_parity_family(&single, 0.1, 2).is_err());
    }

    #[test]
    fn expected_monomial_identifies_planted_subset() {
        let p = parity_pmf(&[0, 1], 0.3, 4).unwrap();
        assert!((expected_monomial(&p, &[0, 1]).unwrap() - 0.3).abs() <= MASS_TOL);
        assert!(expected_monomial(&p, &[2, 3]).unwrap().abs() <= MASS_TOL);
        let uniform = Pmf::uniform(SpaceKind::Binary { d: 4 });
        assert!(expected_monomial(&uniform, &[1]).unwrap().abs() <= MASS_TOL);
        assert!(expected_monomial(&p, &[]).is_err());
    }

    #[test]
    fn symmetric_difference_examples() {
        assert_eq!(
            symmetric_difference(&[vec![0, 1], vec![1, 2]]),
            vec![0, 2]
        );
        assert_eq!(
            symmetric_difference(&[vec![0, 1], vec![1, 2], vec![0, 2]]),
            Vec::<usize>::new()
        );
        assert_eq!(symmetric_difference(&[]), Vec::<usize>::new());
    }

    #[test]
    fn collection_moment_fast_and_brute_agree() {
        let u = SubsetCollection::all_pairs(4).unwrap();
        let family = build_parity_family(&u, 0.3, 4).unwrap();
        // Pairs {0,1} and {2,3}: indices 0 and 5 in lexicographic order.
        assert_eq!(collection_moment(&family, &[0, 5]).unwrap(), 0.0);

        let u3 = SubsetCollection::new(3, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        let triangle = build_parity_family(&u3, 0.4, 3).unwrap();
        assert_eq!(collection_moment(&triangle, &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(collection_moment(&triangle, &[0]).unwrap(), 0.0);
    }

    #[test]
    fn closed_collection_counts() {
        assert_eq!(count_closed_collections(3, 2, 3).unwrap(), 1);
        assert_eq!(count_closed_collections(4, 2, 2).unwrap(), 0);
        // l*r odd forces zero.
        assert_eq!(count_closed_collections(5, 3, 3).unwrap(), 0);
        assert!(count_closed_collections_with_budget(6, 3, 4, 10).is_err());
    }

    #[test]
    fn tuples_bound_values() {
        assert!((tuples_bound(3, 2, 3) - 4.5).abs() <= 1e-12);
        assert_eq!(tuples_bound(5, 3, 3), 0.0);
        assert!((tuples_bound(4, 2, 4) - 160.0).abs() <= 1e-9);
    }

    #[test]
    fn power_pmf_examples() {
        let uniform = Pmf::uniform(SpaceKind::Binary { d: 2 });
        let squared = power_pmf(&uniform, 2).unwrap();
        assert_eq!(squared.kind(), SpaceKind::Binary { d: 4 });
        pmf_close(&squared, &vec![1.0 / 16.0; 16]);

        let p = parity_pmf(&[0], 0.5, 1).unwrap();
        let p2 = power_pmf(&p, 2).unwrap();
        let idx = BinarySpace::new(2).unwrap().index(&[1, 1]);
        assert!((p2.prob(idx) - 0.5625).abs() <= MASS_TOL);

        let same = power_pmf(&p, 1).unwrap();
        pmf_close(&same, p.mass());

        let big = Pmf::uniform(SpaceKind::Binary { d: 11 });
        assert!(power_pmf(&big, 2).is_err());
    }

    #[test]
    fn correlation_condition_triangle_count() {
        let u = SubsetCollection::all_pairs(4).unwrap();
        let family = build_parity_family(&u, 0.1, 4).unwrap();
        let value = correlation_condition_lhs(&family, 100, 3).unwrap();
        assert!((value - 4.0 * 100f64.powf(-1.5)).abs() <= 1e-12);
        assert_eq!(correlation_condition_lhs(&family, 100, 2).unwrap(), 0.0);

        let singles = SubsetCollection::singletons(2).unwrap();
        let family = build_parity_family(&singles, 0.2, 2).unwrap();
        assert_eq!(correlation_condition_lhs(&family, 7, 2).unwrap(), 0.0);
    }

    #[test]
    fn tail_bound_gate_and_values() {
        assert!(corr_tail_bound(2, 64, 2).unwrap() <= 1.0 / 128.0);
        assert!(corr_tail_bound(3, 27, 5).unwrap() <= 1.0 / 54.0);
        assert_eq!(corr_tail_bound(3, 27, 5).unwrap(), 0.0);
        let err = corr_tail_bound(3, 26, 2);
        assert!(matches!(err, Err(Error::TailBoundPrecondition { .. })));
        let nonempty = corr_tail_bound(6, 6u64.pow(6), 2).unwrap();
        assert!(nonempty > 0.0 && nonempty <= 1.0 / (2.0 * 6f64.powi(6)));
    }

    #[test]
    fn centered_family_rejects_violations() {
        let base = Pmf::uniform(SpaceKind::Binary { d: 2 });
        let bad = Pmf::new(
            SpaceKind::Binary { d: 2 },
            vec![0.4, 0.2, 0.2, 0.2],
        )
        .unwrap();
        assert!(CenteredFamily::new(base, vec![bad], 0.1, None).is_err());
    }
}
