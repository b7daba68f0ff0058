//! Exact divergences, channels, joint distributions, and data-processing
//! inequality margins on finite spaces. All logarithms are base 2.

use crate::error::{Error, Result};
use crate::finite_dist::{Pmf, SpaceKind, MASS_TOL};
use crate::util::neumaier_sum;

/// Row-stochastic conditional distribution: one output row per input atom.
#[derive(Clone, Debug)]
pub struct Channel {
    in_size: usize,
    out_kind: SpaceKind,
    probs: Vec<f64>,
}

impl Channel {
    /// Builds a channel from row-major conditional probabilities, checking
    /// that every row is a distribution within [`MASS_TOL`].
    pub fn new(in_size: usize, out_kind: SpaceKind, probs: Vec<f64>) -> Result<Self> {
        let out_size = out_kind.size();
        if probs.len() != in_size * out_size {
            return Err(Error::RowCountMismatch {
                rows: probs.len() / out_size.max(1),
                size: in_size,
            });
        }
        for row in 0..in_size {
            let slice = &probs[row * out_size..(row + 1) * out_size];
            if let Some((j, &m)) = slice
                .iter()
                .enumerate()
                .find(|&(_, &m)| m < 0.0 || !m.is_finite())
            {
                return Err(Error::NegativeMass {
                    index: row * out_size + j,
                    mass: m,
                });
            }
            let total = neumaier_sum(slice.iter().copied());
            if (total - 1.0).abs() > MASS_TOL {
                return Err(Error::RowNotNormalized {
                    row,
                    total,
                    tol: MASS_TOL,
                });
            }
        }
        Ok(Channel {
            in_size,
            out_kind,
            probs,
        })
    }

    pub fn identity(kind: SpaceKind) -> Self {
        let n = kind.size();
        let mut probs = vec![0.0; n * n];
        for i in 0..n {
            probs[i * n + i] = 1.0;
        }
        Channel {
            in_size: n,
            out_kind: kind,
            probs,
        }
    }

    /// Channel that outputs the fixed row distribution regardless of input.
    pub fn constant(in_size: usize, row: &Pmf) -> Self {
        let mut probs = Vec::with_capacity(in_size * row.len());
        for _ in 0..in_size {
            probs.extend_from_slice(row.mass());
        }
        Channel {
            in_size,
            out_kind: row.kind(),
            probs,
        }
    }

    /// Binary symmetric channel on one +-1 coordinate: keeps the input with
    /// probability `1 - flip`.
    pub fn binary_symmetric(flip: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&flip) {
            return Err(Error::ArgOutOfRange {
                name: "flip",
                value: flip,
                expected: "[0, 1]",
            });
        }
        Channel::new(
            2,
            SpaceKind::Binary { d: 1 },
            vec![1.0 - flip, flip, flip, 1.0 - flip],
        )
    }

    pub fn in_size(&self) -> usize {
        self.in_size
    }

    pub fn out_kind(&self) -> SpaceKind {
        self.out_kind
    }

    pub fn out_size(&self) -> usize {
        self.out_kind.size()
    }

    pub fn prob(&self, input: usize, output: usize) -> f64 {
        self.probs[input * self.out_size() + output]
    }

    pub fn row(&self, input: usize) -> &[f64] {
        let n = self.out_size();
        &self.probs[input * n..(input + 1) * n]
    }
}

/// Joint distribution over a pair of finite coordinates, row-major in the
/// first coordinate.
#[derive(Clone, Debug)]
pub struct JointPmf {
    a_kind: SpaceKind,
    b_kind: SpaceKind,
    mass: Vec<f64>,
}

impl JointPmf {
    pub fn new(a_kind: SpaceKind, b_kind: SpaceKind, mass: Vec<f64>) -> Result<Self> {
        let size = a_kind.size() * b_kind.size();
        if mass.len() != size {
            return Err(Error::MassLengthMismatch {
                len: mass.len(),
                size,
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
        Ok(JointPmf {
            a_kind,
            b_kind,
            mass,
        })
    }

    pub fn a_size(&self) -> usize {
        self.a_kind.size()
    }

    pub fn b_size(&self) -> usize {
        self.b_kind.size()
    }

    pub fn a_kind(&self) -> SpaceKind {
        self.a_kind
    }

    pub fn b_kind(&self) -> SpaceKind {
        self.b_kind
    }

    pub fn prob(&self, a: usize, b: usize) -> f64 {
        self.mass[a * self.b_size() + b]
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn marginal_a(&self) -> Pmf {
        let nb = self.b_size();
        let mass = (0..self.a_size())
            .map(|a| neumaier_sum(self.mass[a * nb..(a + 1) * nb].iter().copied()))
            .collect();
        Pmf::new(self.a_kind, mass).expect("marginal of a valid joint")
    }

    pub fn marginal_b(&self) -> Pmf {
        let nb = self.b_size();
        let mass = (0..nb)
            .map(|b| neumaier_sum((0..self.a_size()).map(|a| self.mass[a * nb + b])))
            .collect();
        Pmf::new(self.b_kind, mass).expect("marginal of a valid joint")
    }

    /// Conditional distribution of the second coordinate given `a`;
    /// `None` when `a` has zero marginal mass.
    pub fn conditional_b(&self, a: usize) -> Option<Pmf> {
        let nb = self.b_size();
        let row = &self.mass[a * nb..(a + 1) * nb];
        let total = neumaier_sum(row.iter().copied());
        if total <= 0.0 {
            return None;
        }
        let mass = row.iter().map(|&m| m / total).collect();
        Some(Pmf::new(self.b_kind, mass).expect("normalized conditional"))
    }

    /// Swaps the two coordinates.
    pub fn transpose(&self) -> JointPmf {
        let (na, nb) = (self.a_size(), self.b_size());
        let mut mass = vec![0.0; na * nb];
        for a in 0..na {
            for b in 0..nb {
                mass[b * na + a] = self.prob(a, b);
            }
        }
        JointPmf {
            a_kind: self.b_kind,
            b_kind: self.a_kind,
            mass,
        }
    }
}

fn check_same_space(p: &Pmf, q: &Pmf) -> Result<()> {
    if !p.same_space(q) {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

/// Total variation distance `1/2 sum_x |p(x) - q(x)|`.
pub fn tv(p: &Pmf, q: &Pmf) -> Result<f64> {
    check_same_space(p, q)?;
    Ok(0.5 * neumaier_sum(p.mass().iter().zip(q.mass()).map(|(&a, &b)| (a - b).abs())))
}

/// Squared Hellinger distance `1/2 sum_x (sqrt p - sqrt q)^2`.
pub fn hellinger_sq(p: &Pmf, q: &Pmf) -> Result<f64> {
    check_same_space(p, q)?;
    Ok(0.5
        * neumaier_sum(
            p.mass()
                .iter()
                .zip(q.mass())
                .map(|(&a, &b)| (a.sqrt() - b.sqrt()).powi(2)),
        ))
}

/// Hellinger distance.
pub fn hellinger(p: &Pmf, q: &Pmf) -> Result<f64> {
    Ok(hellinger_sq(p, q)?.sqrt())
}

/// Margins of the sandwich `H^2 <= TV <= sqrt(2) H`: returns
/// `(tv - H^2, sqrt(2) H - tv)`, both nonnegative up to tolerance.
pub fn sandwich_margin(p: &Pmf, q: &Pmf) -> Result<(f64, f64)> {
    let t = tv(p, q)?;
    let h2 = hellinger_sq(p, q)?;
    Ok((t - h2, (2.0 * h2).sqrt() - t))
}

fn entropy_of_masses<'a, I: Iterator<Item = &'a f64>>(masses: I) -> f64 {
    neumaier_sum(masses.map(|&m| if m > 0.0 { -m * m.log2() } else { 0.0 }))
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(p: &Pmf) -> f64 {
    entropy_of_masses(p.mass().iter())
}

/// Mutual information `H(A) + H(B) - H(A,B)` in bits.
pub fn mutual_info(j: &JointPmf) -> f64 {
    let ha = entropy(&j.marginal_a());
    let hb = entropy(&j.marginal_b());
    let hab = entropy_of_masses(j.mass().iter());
    ha + hb - hab
}

/// Pushforward of `p` through `c`.
pub fn compose(c: &Channel, p: &Pmf) -> Result<Pmf> {
    if c.in_size() != p.len() {
        return Err(Error::SpaceMismatch);
    }
    let out = (0..c.out_size())
        .map(|j| neumaier_sum((0..p.len()).map(|i| p.prob(i) * c.prob(i, j))))
        .collect();
    Pmf::new(c.out_kind(), out)
}

/// Joint distribution of `(A, B)` with `A ~ p` and `B | A` given by `c`.
pub fn joint(p: &Pmf, c: &Channel) -> Result<JointPmf> {
    if c.in_size() != p.len() {
        return Err(Error::SpaceMismatch);
    }
    let nb = c.out_size();
    let mut mass = Vec::with_capacity(p.len() * nb);
    for a in 0..p.len() {
        for b in 0..nb {
            mass.push(p.prob(a) * c.prob(a, b));
        }
    }
    JointPmf::new(p.kind(), c.out_kind(), mass)
}

/// Divergence selector for [`dpi_margin`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Divergence {
    Tv,
    Hellinger,
}

/// Data-processing margin `d(p1, p2) - d(c . p1, c . p2)`, nonnegative up
/// to tolerance for both selectors.
pub fn dpi_margin(p1: &Pmf, p2: &Pmf, c: &Channel, divergence: Divergence) -> Result<f64> {
    check_same_space(p1, p2)?;
    let q1 = compose(c, p1)?;
    let q2 = compose(c, p2)?;
    let (before, after) = match divergence {
        Divergence::Tv => (tv(p1, p2)?, tv(&q1, &q2)?),
        Divergence::Hellinger => (hellinger_sq(p1, p2)?, hellinger_sq(&q1, &q2)?),
    };
    Ok(before - after)
}

/// Strong data-processing margin for the binary erase-to-uniform channel:
/// builds `C` that equals `B` with probability `(1+q)/2` and returns
/// `q^2 I(A;B) - I(A;C)`.
pub fn sdpi_margin(chain_joint: &JointPmf, q: f64) -> Result<f64> {
    if chain_joint.b_size() != 2 {
        return Err(Error::NotBinary {
            size: chain_joint.b_size(),
        });
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::ArgOutOfRange {
            name: "q",
            value: q,
            expected: "[0, 1]",
        });
    }
    let keep = (1.0 + q) / 2.0;
    let na = chain_joint.a_size();
    let mut mass = vec![0.0f64; na * 2];
    for a in 0..na {
        for b in 0..2 {
            let m = chain_joint.prob(a, b);
            mass[a * 2 + b] += m * keep;
            mass[a * 2 + (1 - b)] += m * (1.0 - keep);
        }
    }
    let ac = JointPmf::new(chain_joint.a_kind(), chain_joint.b_kind(), mass)?;
    Ok(q * q * mutual_info(chain_joint) - mutual_info(&ac))
}

fn binary_conditionals(j: &JointPmf) -> Result<(Pmf, Pmf, f64, f64)> {
    if j.a_size() != 2 {
        return Err(Error::NotBinary { size: j.a_size() });
    }
    let pa = j.marginal_a();
    let (p0, p1) = (pa.prob(0), pa.prob(1));
    if p0 <= 0.0 || p1 <= 0.0 {
        return Err(Error::DegenerateMarginal);
    }
    let c0 = j.conditional_b(0).ok_or(Error::DegenerateMarginal)?;
    let c1 = j.conditional_b(1).ok_or(Error::DegenerateMarginal)?;
    Ok((c0, c1, p0, p1))
}

/// Margin `I(A;B) - H^2(P_{B|A=-1}, P_{B|A=+1})` for uniform binary `A`.
pub fn hel_i_margin(j: &JointPmf) -> Result<f64> {
    let (c0, c1, p0, _) = binary_conditionals(j)?;
    if (p0 - 0.5).abs() > MASS_TOL {
        return Err(Error::MarginalNotUniform { p0 });
    }
    Ok(mutual_info(j) - hellinger_sq(&c0, &c1)?)
}

/// Margin `I(A;B)/(2 min(Pr[A=-1], Pr[A=+1])) - H^2(P_{B|A=-1}, P_{B|A=+1})`
/// for binary `A` with both sides charged.
pub fn zzi_margin(j: &JointPmf) -> Result<f64> {
    let (c0, c1, p0, p1) = binary_conditionals(j)?;
    let bound = mutual_info(j) / (2.0 * p0.min(p1));
    Ok(bound - hellinger_sq(&c0, &c1)?)
}

/// Margin `H(p, q) - H((1-lambda) p + lambda q, q)` of the mixture
/// contraction, nonnegative up to tolerance.
pub fn mix_contraction_margin(p: &Pmf, q: &Pmf, lambda: f64) -> Result<f64> {
    check_same_space(p, q)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::ArgOutOfRange {
            name: "lambda",
            value: lambda,
            expected: "[0, 1]",
        });
    }
    let mix_mass = p
        .mass()
        .iter()
        .zip(q.mass())
        .map(|(&a, &b)| (1.0 - lambda) * a + lambda * b)
        .collect();
    let mix = Pmf::new(p.kind(), mix_mass)?;
    Ok(hellinger(p, q)? - hellinger(&mix, q)?)
}

/// Margin `I(A; B_1..B_m) - sum_j I(A; B_j)` for a joint whose second
/// coordinate splits into mutually independent blocks of the given sizes
/// (block `j` has stride `prod_{j' < j} sizes[j']` in the flat index).
pub fn info_superadditivity_margin(j: &JointPmf, factor_sizes: &[usize]) -> Result<f64> {
    let product: u128 = factor_sizes.iter().map(|&s| s as u128).product();
    if product != j.b_size() as u128 {
        return Err(Error::FactorSizeMismatch {
            product,
            size: j.b_size(),
        });
    }
    let decompose = |mut b: usize| -> Vec<usize> {
        factor_sizes
            .iter()
            .map(|&s| {
                let r = b % s;
                b /= s;
                r
            })
            .collect()
    };
    let xb = j.marginal_b();
    let m = factor_sizes.len();
    let mut factor_marginals: Vec<Vec<f64>> =
        factor_sizes.iter().map(|&s| vec![0.0; s]).collect();
    for b in 0..j.b_size() {
        let parts = decompose(b);
        for (jj, &part) in parts.iter().enumerate() {
            factor_marginals[jj][part] += xb.prob(b);
        }
    }
    // Independence precondition: the second marginal must factor exactly.
    for b in 0..j.b_size() {
        let parts = decompose(b);
        let prod: f64 = parts
            .iter()
            .enumerate()
            .map(|(jj, &part)| factor_marginals[jj][part])
            .product();
        let deviation = (xb.prob(b) - prod).abs();
        if deviation > 1e-9 {
            return Err(Error::DependentFactors {
                i: 0,
                j: m,
                deviation,
            });
        }
    }
    let total = mutual_info(j);
    let na = j.a_size();
    let mut per_factor_sum = 0.0;
    for (jj, &s) in factor_sizes.iter().enumerate() {
        let mut mass = vec![0.0f64; na * s];
        for a in 0..na {
            for b in 0..j.b_size() {
                mass[a * s + decompose(b)[jj]] += j.prob(a, b);
            }
        }
        let sub = JointPmf::new(j.a_kind(), SpaceKind::Abstract { size: s }, mass)?;
        per_factor_sum += mutual_info(&sub);
    }
    Ok(total - per_factor_sum)
}
