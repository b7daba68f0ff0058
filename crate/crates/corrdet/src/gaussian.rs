//! Planted-correlation Gaussian families: closed-form determinant calculus
//! for moments of density-ratio products, box-truncation machinery with
//! tail bounds, and seeded Monte Carlo cross-checks.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::util::{mix_seed, neumaier_sum, CompensatedSum};

/// Moment order the truncation constants are tuned for; also the largest
/// stack size.
pub const TRUNCATION_B: u32 = 5;

/// Largest number of pairs a covariance stack supports.
pub const STACK_MAX_PAIRS: usize = TRUNCATION_B as usize;

/// Hard cap on `count * d` for bulk sampling, to bound memory.
const SAMPLE_ELEMENT_CAP: u128 = 100_000_000;

fn check_pair(pair: (usize, usize), d: usize) -> Result<()> {
    let (i, j) = pair;
    if i >= d {
        return Err(Error::IndexOutOfRange { index: i, d });
    }
    if j >= d {
        return Err(Error::IndexOutOfRange { index: j, d });
    }
    if i == j {
        return Err(Error::DegeneratePair { index: i });
    }
    Ok(())
}

fn check_sigma_open(sigma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&sigma) {
        return Err(Error::ArgOutOfRange {
            name: "sigma",
            value: sigma,
            expected: "[0, 1)",
        });
    }
    Ok(())
}

/// Standard normal CDF via the complementary error function; relative
/// accuracy better than 1e-14 across the range used here.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

fn normal_density(x: f64) -> f64 {
    (-x * x / 2.0).exp() / (2.0 * PI).sqrt()
}

/// Identity covariance with a single planted off-diagonal correlation.
#[derive(Clone, Debug)]
pub struct PlantedCovariance {
    d: usize,
    pair: (usize, usize),
    sigma: f64,
}

impl PlantedCovariance {
    pub fn new(pair: (usize, usize), sigma: f64, d: usize) -> Result<Self> {
        check_pair(pair, d)?;
        check_sigma_open(sigma)?;
        Ok(Self { d, pair, sigma })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The covariance matrix itself.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::identity(self.d, self.d);
        m[(self.pair.0, self.pair.1)] = self.sigma;
        m[(self.pair.1, self.pair.0)] = self.sigma;
        m
    }

    /// Closed-form inverse: identity outside the planted 2x2 block, and
    /// `1/(1-sigma^2) * [[1, -sigma], [-sigma, 1]]` on it.
    pub fn inverse(&self) -> DMatrix<f64> {
        let c = 1.0 / (1.0 - self.sigma * self.sigma);
        let (i, j) = self.pair;
        let mut m = DMatrix::identity(self.d, self.d);
        m[(i, i)] = c;
        m[(j, j)] = c;
        m[(i, j)] = -self.sigma * c;
        m[(j, i)] = -self.sigma * c;
        m
    }

    pub fn det(&self) -> f64 {
        planted_det(self.sigma)
    }
}

/// Closed-form inverse of the planted covariance.
pub fn planted_inverse(pair: (usize, usize), sigma: f64, d: usize) -> Result<DMatrix<f64>> {
    Ok(PlantedCovariance::new(pair, sigma, d)?.inverse())
}

/// Determinant of the planted covariance: `1 - sigma^2`.
pub fn planted_det(sigma: f64) -> f64 {
    1.0 - sigma * sigma
}

/// Density ratio of the planted distribution to the standard normal at a
/// point: `(1-sigma^2)^{-1/2} exp(-(sigma^2 x_i^2 - 2 sigma x_i x_j +
/// sigma^2 x_j^2) / (2 (1-sigma^2)))`. The pair must be valid for `x`.
pub fn planted_ratio(pair: (usize, usize), sigma: f64, x: &[f64]) -> f64 {
    let (i, j) = pair;
    let s2 = sigma * sigma;
    let quad = s2 * x[i] * x[i] - 2.0 * sigma * x[i] * x[j] + s2 * x[j] * x[j];
    (-quad / (2.0 * (1.0 - s2))).exp() / (1.0 - s2).sqrt()
}

/// Sum-of-precision composite: `I_d + sum_i (inverse(Sigma_{I_i}) - I_d)`.
fn precision_sum(pairs: &[(usize, usize)], sigma: f64, d: usize) -> DMatrix<f64> {
    let c = 1.0 / (1.0 - sigma * sigma);
    let mut a = DMatrix::identity(d, d);
    for &(i, j) in pairs {
        a[(i, i)] += sigma * sigma * c;
        a[(j, j)] += sigma * sigma * c;
        a[(i, j)] -= sigma * c;
        a[(j, i)] -= sigma * c;
    }
    a
}

fn normalized_pairs_distinct(pairs: &[(usize, usize)]) -> bool {
    let mut norm: Vec<(usize, usize)> = pairs
        .iter()
        .map(|&(i, j)| (i.min(j), i.max(j)))
        .collect();
    norm.sort_unstable();
    norm.windows(2).all(|w| w[0] != w[1])
}

/// Largest correlation admitted by the stack gate
/// `4 b^2 sigma / (1 - sigma^2) <= 1/2` with `b = 5`.
pub fn stack_sigma_gate() -> f64 {
    let b2 = (TRUNCATION_B * TRUNCATION_B) as f64;
    // Rationalized root of sigma^2 + 8 b^2 sigma - 1 = 0; avoids cancellation.
    1.0 / (4.0 * b2 + (16.0 * b2 * b2 + 1.0).sqrt())
}

/// Composite covariance for a list of distinct planted pairs, with its
/// inverse and determinant, built under the stack gate.
#[derive(Clone, Debug)]
pub struct CovarianceStack {
    pairs: Vec<(usize, usize)>,
    sigma: f64,
    d: usize,
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    det: f64,
}

impl CovarianceStack {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The composite covariance matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Its inverse, the sum-of-precisions matrix.
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Determinant of the composite covariance.
    pub fn det(&self) -> f64 {
        self.det
    }
}

/// Builds the composite covariance for 2..=5 distinct pairs; verifies
/// positive definiteness, `det <= 2`, and `max |entry| <= 2` at build time.
pub fn stack_build(pairs: &[(usize, usize)], sigma: f64, d: usize) -> Result<CovarianceStack> {
    let r = pairs.len();
    if !(2..=STACK_MAX_PAIRS).contains(&r) {
        return Err(Error::PairCountOutOfRange {
            r,
            min: 2,
            max: STACK_MAX_PAIRS,
        });
    }
    for &p in pairs {
        check_pair(p, d)?;
    }
    if !normalized_pairs_distinct(pairs) {
        return Err(Error::PairsNotDistinct);
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::ArgOutOfRange {
            name: "sigma",
            value: sigma,
            expected: "(0, 1)",
        });
    }
    let b2 = (TRUNCATION_B * TRUNCATION_B) as f64;
    if 4.0 * b2 * sigma / (1.0 - sigma * sigma) > 0.5 {
        return Err(Error::SigmaGateViolated {
            sigma,
            max_sigma: stack_sigma_gate(),
        });
    }
    let a = precision_sum(pairs, sigma, d);
    let chol = a
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    let det_a: f64 = chol.l().diagonal().iter().map(|v| v * v).product();
    let matrix = chol.inverse();
    let det = 1.0 / det_a;
    if det > 2.0 + 1e-9 {
        return Err(Error::Internal {
            detail: format!("composite covariance determinant {det} exceeds 2"),
        });
    }
    if let Some(worst) = matrix.iter().map(|v| v.abs()).fold(None, |acc: Option<f64>, v| {
        Some(acc.map_or(v, |a| a.max(v)))
    }) {
        if worst > 2.0 + 1e-9 {
            return Err(Error::Internal {
                detail: format!("composite covariance entry magnitude {worst} exceeds 2"),
            });
        }
    }
    Ok(CovarianceStack {
        pairs: pairs.to_vec(),
        sigma,
        d,
        matrix,
        inverse: a,
        det,
    })
}

fn det_precision_sum(pairs: &[(usize, usize)], sigma: f64, d: usize) -> Result<f64> {
    let a = precision_sum(pairs, sigma, d);
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.l().diagonal().iter().map(|v| v * v).product())
}

/// Expected product of planted-to-base density ratios under the base,
/// in closed form: `(det(precision sum) * (1-sigma^2)^r)^{-1/2}`.
///
/// Distinct pairs with `r >= 2` go through the gated stack build; a single
/// pair or a list with repeats is evaluated directly (the same-pair-twice
/// second moment `1/(1-sigma^2)` needs no gate).
pub fn high_order_closed(pairs: &[(usize, usize)], sigma: f64, d: usize) -> Result<f64> {
    let r = pairs.len();
    if r == 0 {
        return Ok(1.0);
    }
    if r > STACK_MAX_PAIRS {
        return Err(Error::PairCountOutOfRange {
            r,
            min: 1,
            max: STACK_MAX_PAIRS,
        });
    }
    for &p in pairs {
        check_pair(p, d)?;
    }
    check_sigma_open(sigma)?;
    if sigma == 0.0 {
        return Ok(1.0);
    }
    let det_a = if r >= 2 && normalized_pairs_distinct(pairs) {
        1.0 / stack_build(pairs, sigma, d)?.det()
    } else {
        det_precision_sum(pairs, sigma, d)?
    };
    Ok(1.0 / (det_a * (1.0 - sigma * sigma).powi(r as i32)).sqrt())
}

/// Expected product of centered ratios `prod_i (ratio_i - 1)` under the
/// base, by inclusion-exclusion over the closed-form uncentered moments.
/// Exactly zero whenever some pair contains a coordinate unique to it.
pub fn centered_high_order_closed(
    pairs: &[(usize, usize)],
    sigma: f64,
    d: usize,
) -> Result<f64> {
    let r = pairs.len();
    if r == 0 {
        return Ok(1.0);
    }
    if r > STACK_MAX_PAIRS {
        return Err(Error::PairCountOutOfRange {
            r,
            min: 1,
            max: STACK_MAX_PAIRS,
        });
    }
    let mut terms = Vec::with_capacity(1usize << r);
    for mask in 0u32..(1u32 << r) {
        let subset: Vec<(usize, usize)> = (0..r)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| pairs[i])
            .collect();
        let sign = if (r - subset.len()) % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(sign * high_order_closed(&subset, sigma, d)?);
    }
    Ok(neumaier_sum(terms))
}

/// True when some pair contains a coordinate appearing in no other pair;
/// the centered moment vanishes exactly in that case.
pub fn has_unique_coordinate(pairs: &[(usize, usize)]) -> bool {
    use std::collections::HashMap;
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &(i, j) in pairs {
        *counts.entry(i).or_insert(0) += 1;
        *counts.entry(j).or_insert(0) += 1;
    }
    pairs
        .iter()
        .any(|&(i, j)| counts[&i] == 1 || counts[&j] == 1)
}

const MC_CHUNK: usize = 1 << 16;

fn mc_product(
    pairs: &[(usize, usize)],
    sigma: f64,
    d: usize,
    n_samples: usize,
    seed: u64,
    centered: bool,
) -> Result<(f64, f64)> {
    if n_samples < 10_000 {
        return Err(Error::SamplesTooFew {
            needed: 10_000,
            available: n_samples,
        });
    }
    for &p in pairs {
        check_pair(p, d)?;
    }
    check_sigma_open(sigma)?;
    let mut total = CompensatedSum::new();
    let mut total_sq = CompensatedSum::new();
    let mut x = vec![0.0f64; d];
    let chunks = n_samples.div_ceil(MC_CHUNK);
    for c in 0..chunks {
        let count = MC_CHUNK.min(n_samples - c * MC_CHUNK);
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, c as u64));
        let mut s = 0.0f64;
        let mut s2 = 0.0f64;
        for _ in 0..count {
            for v in x.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let f: f64 = if centered {
                pairs
                    .iter()
                    .map(|&p| planted_ratio(p, sigma, &x) - 1.0)
                    .product()
            } else {
                pairs.iter().map(|&p| planted_ratio(p, sigma, &x)).product()
            };
            s += f;
            s2 += f * f;
        }
        total.add(s);
        total_sq.add(s2);
    }
    let n = n_samples as f64;
    let mean = total.value() / n;
    let var = ((total_sq.value() / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Monte Carlo estimate of the uncentered ratio-product moment under the
/// base measure; returns `(estimate, standard_error)`. Deterministic in
/// `seed`: samples are drawn in fixed-size chunks with per-chunk derived
/// seeds and reduced in chunk order.
pub fn mc_high_order(
    pairs: &[(usize, usize)],
    sigma: f64,
    d: usize,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    mc_product(pairs, sigma, d, n_samples, seed, false)
}

/// Monte Carlo estimate of the centered ratio-product moment.
pub fn mc_centered_high_order(
    pairs: &[(usize, usize)],
    sigma: f64,
    d: usize,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    mc_product(pairs, sigma, d, n_samples, seed, true)
}

/// Upper bound `2 e^{-w^2/(2v)} / ((w/sqrt(v)) sqrt(2 pi))` on
/// `Pr[|W| >= w]` for centered normal `W` with the given variance.
pub fn gauss_tail(w: f64, variance: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::ArgOutOfRange {
            name: "w",
            value: w,
            expected: "> 0",
        });
    }
    if !(variance > 0.0) {
        return Err(Error::ArgOutOfRange {
            name: "variance",
            value: variance,
            expected: "> 0",
        });
    }
    let t = w / variance.sqrt();
    Ok(2.0 * (-t * t / 2.0).exp() / (t * (2.0 * PI).sqrt()))
}

/// Box-truncation constants: escape probability target `p` and box radius.
#[derive(Clone, Copy, Debug)]
pub struct TruncationConfig {
    pub b: u32,
    /// `sigma^b / (64 b n binom(n, <=b) 2^b)`; may underflow to zero for
    /// extreme inputs, in which case `ln_p` remains authoritative.
    pub p: f64,
    pub ln_p: f64,
    /// Half-width of the truncation box; at least 1.
    pub radius: f64,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub sigma: f64,
}

impl TruncationConfig {
    /// `d e^{-radius^2/2}`, bounding the base mass outside the box.
    pub fn escape_bound(&self) -> f64 {
        self.d as f64 * (-self.radius * self.radius / 2.0).exp()
    }

    /// Log-space slack `min(-ln(2mn), ln p, ln sigma) - ln(d e^{-R^2/2})`;
    /// nonnegative by construction of the radius.
    pub fn escape_margin(&self) -> f64 {
        let ln_escape = (self.d as f64).ln() - self.radius * self.radius / 2.0;
        let ln_min = (-((2.0f64).ln() + (self.m as f64).ln() + (self.n as f64).ln()))
            .min(self.ln_p)
            .min(self.sigma.ln());
        ln_min - ln_escape
    }
}

/// Sum of binomial coefficients `C(n, 0) + ... + C(n, cap)` in f64.
fn binomial_prefix_sum(n: usize, cap: u32) -> f64 {
    let mut sum = 1.0f64;
    let mut term = 1.0f64;
    for j in 1..=cap as usize {
        if j > n {
            break;
        }
        term *= (n - j + 1) as f64 / j as f64;
        sum += term;
    }
    sum
}

/// Computes the escape-probability target and box radius for the given
/// instance size, with `b = 5`. `p` is evaluated in log space so large `n`
/// cannot overflow.
pub fn truncation_params(d: usize, m: usize, n: usize, sigma: f64) -> Result<TruncationConfig> {
    if d == 0 || m == 0 || n == 0 {
        return Err(Error::ArgOutOfRange {
            name: "d,m,n",
            value: 0.0,
            expected: "all positive",
        });
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::ArgOutOfRange {
            name: "sigma",
            value: sigma,
            expected: "(0, 1)",
        });
    }
    let b = TRUNCATION_B;
    let ln_p = b as f64 * sigma.ln()
        - (64.0 * b as f64 * n as f64).ln()
        - binomial_prefix_sum(n, b).ln()
        - b as f64 * (2.0f64).ln();
    let ln_2dmn =
        (2.0f64).ln() + (d as f64).ln() + (m as f64).ln() + (n as f64).ln();
    let t1 = (2.0 * ln_2dmn).sqrt();
    let t2 = (4.0 * ((2.0 * d as f64).ln() - ln_p)).sqrt();
    let t3 = (2.0 * ((d as f64).ln() - sigma.ln())).sqrt();
    let radius = t1.max(t2).max(t3).max(1.0);
    Ok(TruncationConfig {
        b,
        p: ln_p.exp(),
        ln_p,
        radius,
        d,
        m,
        n,
        sigma,
    })
}

fn adaptive_simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureFailed {
            tol,
            detail: "adaptive bisection depth exhausted",
        });
    }
    let l = adaptive_simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?;
    let r = adaptive_simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?;
    Ok(l + r)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `Phi(r) - Phi(-r)`: standard normal mass of `[-r, r]`.
fn univariate_box(r: f64) -> f64 {
    1.0 - libm::erfc(r / SQRT_2)
}

/// Rectangle mass `Pr[(W1, W2) in [-r, r]^2]` for a correlated standard
/// normal pair, via 1-D quadrature of the conditional normal.
fn bivariate_box(sigma: f64, r: f64) -> Result<f64> {
    let s = (1.0 - sigma * sigma).sqrt();
    let f = move |x: f64| {
        normal_density(x) * (normal_cdf((r - sigma * x) / s) - normal_cdf((-r - sigma * x) / s))
    };
    let lim = r.min(10.0);
    adaptive_simpson(&f, -lim, lim, 1e-12)
}

/// Planted-distribution mass of the box `[-radius, radius]^d`: bivariate
/// rectangle mass for the correlated pair times the univariate interval
/// mass for each remaining coordinate. Absolute accuracy 1e-10 or better.
pub fn box_mass(pair: (usize, usize), sigma: f64, radius: f64, d: usize) -> Result<f64> {
    check_pair(pair, d)?;
    check_sigma_open(sigma)?;
    if !(radius >= 1.0) {
        return Err(Error::ArgOutOfRange {
            name: "radius",
            value: radius,
            expected: ">= 1",
        });
    }
    let univ = univariate_box(radius);
    if sigma == 0.0 {
        return Ok(univ.powi(d as i32));
    }
    Ok(bivariate_box(sigma, radius)? * univ.powi(d as i32 - 2))
}

/// Centering radius `2 sigma^2/(1-sigma^2) + 4 sigma R^2/(1-sigma^2)^2 +
/// 2 sigma` certified for the box-truncated family.
pub fn rho_bound(sigma: f64, radius: f64) -> f64 {
    let s2 = 1.0 - sigma * sigma;
    2.0 * sigma * sigma / s2 + 4.0 * sigma * radius * radius / (s2 * s2) + 2.0 * sigma
}

/// Worst observed truncated-density-ratio deviation over sampled points.
#[derive(Clone, Copy, Debug)]
pub struct RatioCheckReport {
    pub max_deviation: f64,
    /// The certified centering radius the deviation must stay under.
    pub bound: f64,
    /// Gate value `sigma radius^2/(1-sigma^2)`, at most 1.
    pub gate_value: f64,
    pub points_checked: usize,
}

/// Samples points in the box (always including the four extreme corners of
/// the correlated pair) and measures the worst deviation of the truncated
/// density ratio from 1. Requires the gate
/// `sigma radius^2/(1-sigma^2) <= 1` under which `rho_bound` is certified.
pub fn truncated_ratio_check(
    pair: (usize, usize),
    sigma: f64,
    radius: f64,
    d: usize,
    num_points: usize,
    seed: u64,
) -> Result<RatioCheckReport> {
    check_pair(pair, d)?;
    check_sigma_open(sigma)?;
    if !(radius >= 1.0) {
        return Err(Error::ArgOutOfRange {
            name: "radius",
            value: radius,
            expected: ">= 1",
        });
    }
    let gate_value = sigma * radius * radius / (1.0 - sigma * sigma);
    if gate_value > 1.0 {
        return Err(Error::TruncationGateViolated { value: gate_value });
    }
    let factor = if sigma == 0.0 {
        1.0
    } else {
        box_mass(pair, 0.0, radius, d)? / box_mass(pair, sigma, radius, d)?
    };
    let bound = rho_bound(sigma, radius);
    let mut worst = 0.0f64;
    let mut x = vec![0.0f64; d];
    let mut points = 0usize;
    {
        let (i, j) = pair;
        for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            x.iter_mut().for_each(|v| *v = 0.0);
            x[i] = si * radius;
            x[j] = sj * radius;
            worst = worst.max((planted_ratio(pair, sigma, &x) * factor - 1.0).abs());
            points += 1;
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..num_points {
        for v in x.iter_mut() {
            *v = rng.gen_range(-radius..=radius);
        }
        worst = worst.max((planted_ratio(pair, sigma, &x) * factor - 1.0).abs());
        points += 1;
    }
    Ok(RatioCheckReport {
        max_deviation: worst,
        bound,
        gate_value,
        points_checked: points,
    })
}

/// Row-major block of `count` samples of dimension `d`.
#[derive(Clone, Debug)]
pub struct SampleBlock {
    d: usize,
    data: Vec<f64>,
}

impl SampleBlock {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.d..(idx + 1) * self.d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Draws i.i.d. samples from the planted distribution: independent standard
/// normals with the correlated pair generated as
/// `(g1, sigma g1 + sqrt(1-sigma^2) g2)`.
pub fn sample_planted(
    pair: (usize, usize),
    sigma: f64,
    d: usize,
    count: usize,
    seed: u64,
) -> Result<SampleBlock> {
    check_pair(pair, d)?;
    check_sigma_open(sigma)?;
    if (count as u128) * (d as u128) > SAMPLE_ELEMENT_CAP {
        return Err(Error::ArgOutOfRange {
            name: "count",
            value: count as f64,
            expected: "count * d within the 1e8-element sampling cap",
        });
    }
    let (i, j) = pair;
    let comp = (1.0 - sigma * sigma).sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut data = vec![0.0f64; count * d];
    for row in data.chunks_exact_mut(d) {
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        row[j] = sigma * row[i] + comp * row[j];
    }
    Ok(SampleBlock { d, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_matches_oracle() {
        let cases = [
            (-8.0, 6.2209605742717841235159951725881884224887172789e-16),
            (-5.0, 2.8665157187919391167375233287464535385442301361188e-7),
            (-3.0, 0.0013498980316300945266518147675949773778293681583806),
            (-1.0, 0.1586552539314570514147674543679620775220870332734),
            (-0.5, 0.30853753872598689636229538939166226011639782444542),
            (0.3, 0.61791142218895263730652896312141764805124146718123),
            (1.7, 0.95543453724145696051256699529202799339392382957658),
            (2.5, 0.99379033467422386483302189542580777887210225307691),
            (5.0, 0.99999971334842812080608832624766712535464614557699),
        ];
        for (x, want) in cases {
            let got = normal_cdf(x);
            let rel = ((got - want) / want).abs();
            assert!(rel <= 1e-14, "cdf({x}) relative error {rel}");
        }
        assert_eq!(normal_cdf(0.0), 0.5);
    }

    #[test]
    fn planted_det_and_inverse() {
        assert!((planted_det(0.1) - 0.99).abs() <= 1e-15);
        assert_eq!(planted_det(0.0), 1.0);
        for &sigma in &[0.01, 0.1, 0.5, 0.9] {
            for &d in &[2usize, 5, 16] {
                let cov = PlantedCovariance::new((0, d - 1), sigma, d).unwrap();
                let product = cov.matrix() * cov.inverse();
                let dev = (&product - DMatrix::<f64>::identity(d, d)).abs().max();
                assert!(dev <= 1e-12, "sigma {sigma} d {d}: {dev}");
            }
        }
        let inv = planted_inverse((1, 3), 0.2, 5).unwrap();
        assert!((inv[(1, 1)] - 1.0 / 0.96).abs() <= 1e-15);
        assert!((inv[(1, 3)] + 0.2 / 0.96).abs() <= 1e-15);
        assert_eq!(inv[(0, 0)], 1.0);
        assert!(planted_inverse((2, 2), 0.2, 5).is_err());
        assert!(planted_inverse((0, 5), 0.2, 5).is_err());
        assert!(planted_inverse((0, 1), 1.0, 5).is_err());
    }

    #[test]
    fn ratio_matches_density_quotient() {
        let cov = PlantedCovariance::new((0, 2), 0.3, 4).unwrap();
        let inv = cov.inverse();
        let det = cov.det();
        let points = [
            vec![0.5, -1.0, 2.0, 0.1],
            vec![3.0, 0.0, 3.0, -2.0],
            vec![-1.5, 0.7, 0.9, 0.0],
        ];
        for x in points {
            let xv = nalgebra::DVector::from_vec(x.clone());
            let quad = (xv.transpose() * &inv * &xv)[(0, 0)];
            let base_quad = xv.dot(&xv);
            let expected = (-0.5 * (quad - base_quad)).exp() / det.sqrt();
            let got = planted_ratio((0, 2), 0.3, &x);
            assert!(
                ((got - expected) / expected).abs() <= 1e-12,
                "{got} vs {expected}"
            );
        }
    }

    #[test]
    fn ratio_corner_formula() {
        let sigma = 0.001f64;
        let r = 5.0f64;
        let mut x = vec![0.0; 4];
        x[1] = r;
        x[2] = r;
        let s2 = 1.0 - sigma * sigma;
        let expected =
            (-(2.0 * sigma * sigma * r * r - 2.0 * sigma * r * r) / (2.0 * s2)).exp() / s2.sqrt();
        let got = planted_ratio((1, 2), sigma, &x);
        assert!(((got - expected) / expected).abs() <= 1e-15);
        assert!(got > 1.0);
    }

    #[test]
    fn stack_gate_and_invariants() {
        assert!((stack_sigma_gate() - 0.004999875006249609).abs() <= 1e-15);
        let pairs = [(0, 1), (2, 3)];
        let stack = stack_build(&pairs, 0.004, 4).unwrap();
        let s2 = 1.0 - 0.004f64 * 0.004;
        assert!((stack.det() - s2 * s2).abs() <= 1e-12);
        assert!(stack.matrix().iter().all(|v| v.abs() <= 2.0));
        let product = stack.matrix() * stack.inverse();
        let dev = (&product - DMatrix::<f64>::identity(4, 4)).abs().max();
        assert!(dev <= 1e-12);

        assert!(matches!(
            stack_build(&[(0, 1), (1, 0)], 0.004, 4),
            Err(Error::PairsNotDistinct)
        ));
        assert!(matches!(
            stack_build(&pairs, 0.01, 4),
            Err(Error::SigmaGateViolated { .. })
        ));
        assert!(matches!(
            stack_build(&[(0, 1)], 0.004, 4),
            Err(Error::PairCountOutOfRange { .. })
        ));
    }

    #[test]
    fn closed_moments_match_frozen_values() {
        let sigma = 0.004f64;
        let one = high_order_closed(&[(0, 1), (2, 3)], sigma, 4).unwrap();
        assert!((one - 1.0).abs() <= 1e-12, "{one}");
        let overlapping = high_order_closed(&[(0, 1), (1, 2)], sigma, 4).unwrap();
        assert!((overlapping - 1.0).abs() <= 1e-12, "{overlapping}");

        for &s in &[0.004, 0.3] {
            let same = high_order_closed(&[(0, 1), (0, 1)], s, 3).unwrap();
            let expect = 1.0 / (1.0 - s * s);
            assert!((same - expect).abs() <= 1e-10, "sigma {s}: {same}");
        }

        let single = high_order_closed(&[(1, 2)], 0.3, 4).unwrap();
        assert!((single - 1.0).abs() <= 1e-12);
        assert_eq!(high_order_closed(&[], 0.3, 4).unwrap(), 1.0);

        let triangle = high_order_closed(&[(0, 1), (1, 2), (0, 2)], sigma, 3).unwrap();
        assert!(
            (triangle - 1.000000064000004096).abs() <= 1e-12,
            "{triangle}"
        );
    }

    #[test]
    fn centered_moments() {
        let sigma = 0.004f64;
        let zero = centered_high_order_closed(&[(0, 1), (2, 3)], sigma, 4).unwrap();
        assert!(zero.abs() <= 1e-12, "{zero}");
        assert!(has_unique_coordinate(&[(0, 1), (2, 3)]));

        let single = centered_high_order_closed(&[(0, 1)], sigma, 2).unwrap();
        assert!(single.abs() <= 1e-12);

        let triangle =
            centered_high_order_closed(&[(0, 1), (1, 2), (0, 2)], sigma, 3).unwrap();
        assert!(
            (triangle - 6.400000409600026e-8).abs() <= 1e-12,
            "{triangle}"
        );
        assert!(!has_unique_coordinate(&[(0, 1), (1, 2), (0, 2)]));
    }

    #[test]
    fn mc_agrees_with_closed_form() {
        let (est, se) = mc_high_order(&[(0, 1), (2, 3)], 0.0, 4, 10_000, 11).unwrap();
        assert_eq!(est, 1.0);
        assert_eq!(se, 0.0);

        let sigma = 0.2f64;
        let pairs = [(0, 1), (1, 2)];
        let closed = {
            let a = det_precision_sum(&pairs, sigma, 3).unwrap();
            1.0 / (a * (1.0 - sigma * sigma).powi(2)).sqrt()
        };
        let (est, se) = mc_high_order(&pairs, sigma, 3, 200_000, 12).unwrap();
        assert!(se > 0.0);
        assert!(
            (est - closed).abs() <= 4.0 * se,
            "estimate {est} closed {closed} se {se}"
        );

        let (cest, cse) = mc_centered_high_order(&[(0, 1), (2, 3)], sigma, 4, 200_000, 13).unwrap();
        assert!(cest.abs() <= 4.0 * cse, "centered {cest} se {cse}");

        assert!(matches!(
            mc_high_order(&pairs, sigma, 3, 100, 1),
            Err(Error::SamplesTooFew { .. })
        ));
    }

    #[test]
    fn tail_bound_values() {
        let at_sigma = gauss_tail(0.25, 0.0625).unwrap();
        assert!((at_sigma - 0.4839414490382866995956603858711).abs() <= 1e-12);
        assert!(gauss_tail(3.0, 1.0).unwrap() < gauss_tail(2.9, 1.0).unwrap());
        assert!(gauss_tail(0.0, 1.0).is_err());
        assert!(gauss_tail(1.0, 0.0).is_err());
    }

    #[test]
    fn truncation_params_frozen_point() {
        let cfg = truncation_params(4, 1, 10, 0.001).unwrap();
        assert_eq!(cfg.b, 5);
        assert!((cfg.ln_p - -52.53375666984302).abs() <= 1e-10);
        assert!(((cfg.p - 1.530662225705329e-23) / 1.530662225705329e-23).abs() <= 1e-10);
        assert!((cfg.radius - 14.780148607036785).abs() <= 1e-10);
        assert!(cfg.radius >= 1.0);
        assert!(cfg.radius >= (2.0 * (4.0f64 / 0.001).ln()).sqrt());
        assert!(cfg.escape_margin() >= 0.0);
    }

    #[test]
    fn truncation_params_extreme_inputs() {
        let cfg = truncation_params(16, 32, 1_000_000, 0.004).unwrap();
        assert!(cfg.p > 0.0);
        assert!(cfg.escape_margin() >= 0.0);
        let tiny = truncation_params(4, 1, 1_000_000, 1e-60).unwrap();
        assert_eq!(tiny.p, 0.0);
        assert!(tiny.ln_p.is_finite());
        assert!(tiny.radius.is_finite() && tiny.radius > 1.0);
        assert!(tiny.escape_margin() >= 0.0);
        assert!(truncation_params(0, 1, 1, 0.1).is_err());
        assert!(truncation_params(4, 1, 1, 0.0).is_err());
    }

    #[test]
    fn box_mass_values() {
        let frozen = 0.9633599145341617583381526482872206887;
        let got = box_mass((0, 1), 0.2, 2.5, 3).unwrap();
        assert!((got - frozen).abs() <= 1e-10, "{got}");

        let independent = box_mass((0, 1), 0.0, 2.5, 3).unwrap();
        let univ = 1.0 - libm::erfc(2.5 / SQRT_2);
        assert!((independent - univ.powi(3)).abs() <= 1e-15);

        let tiny_corr = box_mass((0, 1), 1e-12, 2.5, 2).unwrap();
        assert!((tiny_corr - univ * univ).abs() <= 1e-9);

        let huge = box_mass((0, 1), 0.2, 40.0, 4).unwrap();
        assert!((huge - 1.0).abs() <= 1e-12);

        assert!(box_mass((0, 1), 0.2, 0.5, 3).is_err());
    }

    #[test]
    fn truncated_ratio_gate_and_bound() {
        let cfg = truncation_params(4, 1, 1, 0.01).unwrap();
        assert!(matches!(
            truncated_ratio_check((0, 1), 0.01, cfg.radius, 4, 10, 1),
            Err(Error::TruncationGateViolated { .. })
        ));

        let cfg = truncation_params(4, 1, 10, 0.001).unwrap();
        let report = truncated_ratio_check((0, 1), 0.001, cfg.radius, 4, 2_000, 5).unwrap();
        assert!(report.gate_value <= 1.0);
        assert!((report.bound - 0.8758149190113299).abs() <= 1e-10);
        assert!(report.max_deviation > 0.0);
        assert!(
            report.max_deviation <= report.bound,
            "deviation {} bound {}",
            report.max_deviation,
            report.bound
        );

        let zero = truncated_ratio_check((0, 1), 0.0, 3.0, 3, 50, 2).unwrap();
        assert_eq!(zero.max_deviation, 0.0);
        assert_eq!(zero.bound, 0.0);
    }

    #[test]
    fn sampler_statistics() {
        let block = sample_planted((0, 2), 0.3, 4, 200_000, 21).unwrap();
        assert_eq!(block.len(), 200_000);
        assert_eq!(block.d(), 4);
        let n = block.len() as f64;
        let mut sums = [0.0f64; 4];
        let mut prods = [[0.0f64; 4]; 4];
        for idx in 0..block.len() {
            let row = block.row(idx);
            for a in 0..4 {
                sums[a] += row[a];
                for b in 0..4 {
                    prods[a][b] += row[a] * row[b];
                }
            }
        }
        let cov = |a: usize, b: usize| prods[a][b] / n - sums[a] / n * (sums[b] / n);
        assert!((cov(0, 2) - 0.3).abs() <= 0.01, "{}", cov(0, 2));
        assert!(cov(0, 1).abs() <= 0.01);
        assert!(cov(1, 3).abs() <= 0.01);
        for a in 0..4 {
            assert!((cov(a, a) - 1.0).abs() <= 0.02);
        }

        let rerun = sample_planted((0, 2), 0.3, 4, 10, 21).unwrap();
        let first = sample_planted((0, 2), 0.3, 4, 10, 21).unwrap();
        assert_eq!(rerun.data(), first.data());

        let independent = sample_planted((0, 1), 0.0, 2, 10_000, 3).unwrap();
        assert!(independent.data().iter().all(|v| v.is_finite()));
    }
}
