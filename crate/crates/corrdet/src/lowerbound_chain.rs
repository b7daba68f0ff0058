//! Constructive chain machinery: the clipping-scale fixed point, the good
//! set of n-sample inputs, the clip-to-bias channels producing Y and Z, the
//! exact joint over (X, Y, Z) with its bias identities, and the reduction of
//! a general centered family to binary-centered form.

use crate::error::{Error, Result};
use crate::finite_dist::{power_pmf, CenteredFamily, Pmf, SpaceKind, ATOM_BUDGET, MASS_TOL};
use crate::infotheory::{
    compose, entropy, hellinger_sq, joint, mix_contraction_margin, mutual_info, sdpi_margin,
    zzi_margin, Channel, JointPmf,
};
use crate::util::{neumaier_sum, Combinations};

/// Solution of the clipping-scale equation
/// `alpha = (2 sqrt(2 ln(2 k^2 / alpha^2)) + 3) rho sqrt(n)`.
#[derive(Clone, Copy, Debug)]
pub struct AlphaSolution {
    pub alpha: f64,
    pub k: usize,
    pub n: usize,
    pub rho: f64,
}

fn alpha_rhs(alpha: f64, k: usize, n: usize, rho: f64) -> f64 {
    let k2 = 2.0 * (k as f64) * (k as f64);
    (2.0 * (2.0 * (k2 / (alpha * alpha)).ln()).sqrt() + 3.0) * rho * (n as f64).sqrt()
}

/// Largest correlation admissible for the fixed point to land in (0, 1/2].
pub fn rho_gate(k: usize, n: usize) -> f64 {
    let ln_term = (8.0 * (k as f64) * (k as f64)).ln();
    1.0 / (2.0 * (n as f64).sqrt() * (2.0 * (2.0 * ln_term).sqrt() + 3.0))
}

/// Solves the clipping-scale equation by bisection on (0, 1/2]. The right
/// side is strictly decreasing in alpha, so the root is unique.
pub fn solve_alpha(k: usize, n: usize, rho: f64) -> Result<AlphaSolution> {
    if k < 1 || n < 1 || !(rho > 0.0) {
        return Err(Error::ArgOutOfRange {
            name: "rho",
            value: rho,
            expected: "> 0 with k, n >= 1",
        });
    }
    let max_rho = rho_gate(k, n);
    if rho > max_rho {
        return Err(Error::RhoGateViolated {
            rho,
            max_rho,
            k,
            n,
        });
    }
    let mut lo = 1e-30f64;
    let mut hi = 0.5f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if alpha_rhs(mid, k, n, rho) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let solution = AlphaSolution { alpha, k, n, rho };
    let residual = (alpha_rhs(alpha, k, n, rho) - alpha).abs();
    if residual > 1e-9 {
        return Err(Error::Internal {
            detail: format!("alpha bisection residual {residual}"),
        });
    }
    let (lower, upper) = solution.bounds();
    if alpha + 1e-9 < lower || alpha > upper + 1e-9 {
        return Err(Error::Internal {
            detail: format!("alpha {alpha} escapes bounds [{lower}, {upper}]"),
        });
    }
    Ok(solution)
}

impl AlphaSolution {
    /// Fixed-point residual `|rhs(alpha) - alpha|`.
    pub fn residual(&self) -> f64 {
        (alpha_rhs(self.alpha, self.k, self.n, self.rho) - self.alpha).abs()
    }

    /// The proven enclosure `(3 sqrt(n) rho, min(1/2, rho sqrt(n) (2 sqrt(2
    /// ln(2 k^2/(9 n rho^2))) + 3)))` for the fixed point.
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.n as f64;
        let k = self.k as f64;
        let lower = 3.0 * n.sqrt() * self.rho;
        let arg = 2.0 * k * k / (9.0 * n * self.rho * self.rho);
        let upper = if arg > 1.0 {
            (self.rho * n.sqrt() * (2.0 * (2.0 * arg.ln()).sqrt() + 3.0)).min(0.5)
        } else {
            0.5
        };
        (lower, upper)
    }
}

/// Clamp to [-1, 1].
pub fn psi(s: f64) -> f64 {
    s.clamp(-1.0, 1.0)
}

/// Density ratio `alt_i^n(x) / base^n(x)` at the n-sample atom with the
/// given flat index (sample j is digit j of the index in base |space|).
pub fn power_ratio(family: &CenteredFamily, i: usize, n: usize, flat: usize) -> f64 {
    let m = family.base().len();
    let mut ratio = 1.0f64;
    let mut rest = flat;
    for _ in 0..n {
        ratio *= family.ratio(i, rest % m);
        rest /= m;
    }
    ratio
}

/// n-sample density `alt_i^n(x)` (or `base^n(x)` when `i` is `None`).
pub fn power_density(family: &CenteredFamily, i: Option<usize>, n: usize, flat: usize) -> f64 {
    let m = family.base().len();
    let mut mass = 1.0f64;
    let mut rest = flat;
    for _ in 0..n {
        let atom = rest % m;
        mass *= match i {
            Some(i) => family.alternative(i).prob(atom),
            None => family.base().prob(atom),
        };
        rest /= m;
    }
    mass
}

/// Whether every hypothesis's n-sample likelihood ratio at `flat` is within
/// `alpha` of 1.
pub fn in_truncation_set(family: &CenteredFamily, n: usize, alpha: f64, flat: usize) -> bool {
    (0..family.k()).all(|i| (power_ratio(family, i, n, flat) - 1.0).abs() <= alpha)
}

/// Mass the n-sample distribution of hypothesis `i` (base when `None`)
/// places outside the truncation set.
pub fn truncation_escape_mass(
    family: &CenteredFamily,
    n: usize,
    alpha: f64,
    i: Option<usize>,
) -> Result<f64> {
    let m = family.base().len() as u128;
    let total = m.checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > u128::from(ATOM_BUDGET) {
        return Err(Error::AtomBudgetExceeded {
            required: total,
            budget: ATOM_BUDGET,
        });
    }
    Ok(neumaier_sum((0..total as usize).filter_map(|flat| {
        if in_truncation_set(family, n, alpha, flat) {
            None
        } else {
            Some(power_density(family, i, n, flat))
        }
    })))
}

fn y_coordinate_prob_plus(psi_val: f64) -> f64 {
    0.5 + 0.25 * psi_val
}

/// Channel from n-sample inputs to `{-1,+1}^k`: coordinate `i` is +1 with
/// probability `1/2 + psi((ratio_i - 1)/alpha)/4`, independently across
/// coordinates. Every coordinate probability lies in [1/4, 3/4].
pub fn y_channel(family: &CenteredFamily, n: usize, alpha: f64) -> Result<Channel> {
    let k = family.k();
    let m = family.base().len() as u128;
    let nx = m.checked_pow(n as u32).unwrap_or(u128::MAX);
    let ny = 1u128 << k;
    if nx.checked_mul(ny).map_or(true, |t| t > u128::from(ATOM_BUDGET)) {
        return Err(Error::AtomBudgetExceeded {
            required: nx.saturating_mul(ny),
            budget: ATOM_BUDGET,
        });
    }
    let (nx, ny) = (nx as usize, ny as usize);
    let mut probs = Vec::with_capacity(nx * ny);
    for flat in 0..nx {
        let psis: Vec<f64> = (0..k)
            .map(|i| psi((power_ratio(family, i, n, flat) - 1.0) / alpha))
            .collect();
        for y in 0..ny {
            let mut p = 1.0f64;
            for (i, &ps) in psis.iter().enumerate() {
                let plus = y_coordinate_prob_plus(ps);
                p *= if y >> i & 1 == 1 { plus } else { 1.0 - plus };
            }
            probs.push(p);
        }
    }
    Channel::new(nx, SpaceKind::Binary { d: k }, probs)
}

/// Per-coordinate binary symmetric channel on `{-1,+1}^k` keeping each
/// coordinate with probability `(1 + 2 alpha)/2`.
pub fn z_channel(alpha: f64, k: usize) -> Result<Channel> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::ArgOutOfRange {
            name: "alpha",
            value: alpha,
            expected: "(0, 1/2]",
        });
    }
    let keep = (1.0 + 2.0 * alpha) / 2.0;
    let size = 1usize << k;
    let mut probs = Vec::with_capacity(size * size);
    for y in 0..size {
        for z in 0..size {
            let agree = !(y ^ z);
            let mut p = 1.0f64;
            for i in 0..k {
                p *= if agree >> i & 1 == 1 { keep } else { 1.0 - keep };
            }
            probs.push(p);
        }
    }
    Channel::new(size, SpaceKind::Binary { d: k }, probs)
}

/// Exact joint distribution over (X, Y, Z) for a centered family powered to
/// n samples, with the clipping scale solved from (k, n, rho).
#[derive(Clone, Debug)]
pub struct ChainInstance {
    family: CenteredFamily,
    n: usize,
    alpha: AlphaSolution,
    x_pmf: Pmf,
    psi_vals: Vec<Vec<f64>>,
    ratios: Vec<Vec<f64>>,
    in_t: Vec<bool>,
    joint: Vec<f64>,
    nx: usize,
    k: usize,
}

/// Builds the chain with the solved clipping scale.
pub fn build_chain(family: &CenteredFamily, n: usize) -> Result<ChainInstance> {
    let alpha = solve_alpha(family.k(), n, family.rho())?;
    build_chain_with_alpha(family, n, alpha)
}

/// Builds the chain with an explicit clipping scale. The structural
/// identities (product forms, on-set equality, the Y/Z bias ratio) hold for
/// any scale in (0, 1/2]; the alpha^2/k bias and escape bounds are only
/// guaranteed for the solved scale.
pub fn build_chain_with_alpha(
    family: &CenteredFamily,
    n: usize,
    alpha: AlphaSolution,
) -> Result<ChainInstance> {
    if !(alpha.alpha > 0.0 && alpha.alpha <= 0.5) {
        return Err(Error::ArgOutOfRange {
            name: "alpha",
            value: alpha.alpha,
            expected: "(0, 1/2]",
        });
    }
    let k = family.k();
    let m = family.base().len() as u128;
    let nx_u = m.checked_pow(n as u32).unwrap_or(u128::MAX);
    let nyz = 1u128 << (2 * k);
    if nx_u.checked_mul(nyz).map_or(true, |t| t > u128::from(ATOM_BUDGET)) {
        return Err(Error::AtomBudgetExceeded {
            required: nx_u.saturating_mul(nyz),
            budget: ATOM_BUDGET,
        });
    }
    let nx = nx_u as usize;
    let ny = 1usize << k;
    let a = alpha.alpha;
    let x_pmf = power_pmf(family.base(), n)?;
    let mut ratios = vec![vec![0.0f64; nx]; k];
    let mut psi_vals = vec![vec![0.0f64; nx]; k];
    let mut in_t = vec![true; nx];
    for flat in 0..nx {
        for i in 0..k {
            let r = power_ratio(family, i, n, flat);
            ratios[i][flat] = r;
            psi_vals[i][flat] = psi((r - 1.0) / a);
            if (r - 1.0).abs() > a {
                in_t[flat] = false;
            }
        }
    }
    let keep = (1.0 + 2.0 * a) / 2.0;
    let mut joint = vec![0.0f64; nx * ny * ny];
    for x in 0..nx {
        let base_mass = x_pmf.prob(x);
        for y in 0..ny {
            let mut py = base_mass;
            for i in 0..k {
                let plus = y_coordinate_prob_plus(psi_vals[i][x]);
                py *= if y >> i & 1 == 1 { plus } else { 1.0 - plus };
            }
            for z in 0..ny {
                let agree = !(y ^ z);
                let mut pz = py;
                for i in 0..k {
                    pz *= if agree >> i & 1 == 1 { keep } else { 1.0 - keep };
                }
                joint[(x * ny + y) * ny + z] = pz;
            }
        }
    }
    Ok(ChainInstance {
        family: family.clone(),
        n,
        alpha,
        x_pmf,
        psi_vals,
        ratios,
        in_t,
        joint,
        nx,
        k,
    })
}

impl ChainInstance {
    pub fn family(&self) -> &CenteredFamily {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> AlphaSolution {
        self.alpha
    }

    pub fn x_size(&self) -> usize {
        self.nx
    }

    pub fn yz_size(&self) -> usize {
        1 << self.k
    }

    /// Base-power distribution of X.
    pub fn x_pmf(&self) -> &Pmf {
        &self.x_pmf
    }

    /// n-sample distribution of hypothesis `i` as a pmf over the X space.
    pub fn alternative_power(&self, i: usize) -> Pmf {
        let mass = (0..self.nx)
            .map(|x| self.x_pmf.prob(x) * self.ratios[i][x])
            .collect();
        Pmf::new(self.x_pmf.kind(), mass).expect("powered alternative")
    }

    pub fn joint_prob(&self, x: usize, y: usize, z: usize) -> f64 {
        let ny = self.yz_size();
        self.joint[(x * ny + y) * ny + z]
    }

    pub fn ratio(&self, i: usize, x: usize) -> f64 {
        self.ratios[i][x]
    }

    pub fn psi_val(&self, i: usize, x: usize) -> f64 {
        self.psi_vals[i][x]
    }

    pub fn in_truncation(&self, x: usize) -> bool {
        self.in_t[x]
    }

    /// Joint over (X, Y), marginalizing Z out.
    pub fn xy_joint(&self) -> JointPmf {
        let ny = self.yz_size();
        let mut mass = vec![0.0f64; self.nx * ny];
        for x in 0..self.nx {
            for y in 0..ny {
                mass[x * ny + y] =
                    neumaier_sum((0..ny).map(|z| self.joint_prob(x, y, z)));
            }
        }
        JointPmf::new(self.x_pmf.kind(), SpaceKind::Binary { d: self.k }, mass)
            .expect("marginal of a valid joint")
    }

    /// Joint over (X, Z), marginalizing Y out.
    pub fn xz_joint(&self) -> JointPmf {
        let ny = self.yz_size();
        let mut mass = vec![0.0f64; self.nx * ny];
        for x in 0..self.nx {
            for z in 0..ny {
                mass[x * ny + z] =
                    neumaier_sum((0..ny).map(|y| self.joint_prob(x, y, z)));
            }
        }
        JointPmf::new(self.x_pmf.kind(), SpaceKind::Binary { d: self.k }, mass)
            .expect("marginal of a valid joint")
    }

    pub fn y_marginal(&self) -> Pmf {
        self.xy_joint().marginal_b()
    }

    pub fn z_marginal(&self) -> Pmf {
        self.xz_joint().marginal_b()
    }

    /// `Pr[Y_i = +1 | X = x]`.
    pub fn y_prob_plus(&self, i: usize, x: usize) -> f64 {
        y_coordinate_prob_plus(self.psi_vals[i][x])
    }

    /// `Pr[Z_i = +1 | X = x]`.
    pub fn z_prob_plus(&self, i: usize, x: usize) -> f64 {
        0.5 * (1.0 + self.alpha.alpha * self.psi_vals[i][x])
    }

    /// Marginal `Pr[Y_i = +1]`.
    pub fn y_i_plus(&self, i: usize) -> f64 {
        neumaier_sum((0..self.nx).map(|x| self.x_pmf.prob(x) * self.y_prob_plus(i, x)))
    }

    /// Marginal `Pr[Z_i = +1]`.
    pub fn z_i_plus(&self, i: usize) -> f64 {
        neumaier_sum((0..self.nx).map(|x| self.x_pmf.prob(x) * self.z_prob_plus(i, x)))
    }
}

/// Worst-case deviations of the five bias identities of the chain, plus the
/// truncation-escape masses.
#[derive(Clone, Debug)]
pub struct BiasReport {
    /// Max deviation of P(X,Y) from `2^-k base^n(x) prod_i (1 + y_i psi_i/2)`.
    pub item1_max_dev: f64,
    /// Max deviation of P(X,Z) from `2^-k base^n(x) prod_i (1 + alpha z_i psi_i)`.
    pub item2_max_dev: f64,
    /// Max deviation of `P(X, Z_i = +1)` from `alt_i^n(x)/2` on the good set.
    pub item3_max_dev: f64,
    /// Max over i of `|Pr[Z_i = +1] - 1/2|`.
    pub item4_max_dev: f64,
    /// Bound `alpha^2/k` for item 4 and the escape masses.
    pub item4_bound: f64,
    /// Max deviation of `|Pr[Y_i=+1] - 1/2|` from `|Pr[Z_i=+1] - 1/2|/(2 alpha)`.
    pub item5_identity_dev: f64,
    /// Max over i of `|Pr[Y_i = +1] - 1/2|`.
    pub y_bias_max: f64,
    /// Bound `alpha/(2k)` on the Y biases, implied by items 4 and 5.
    pub y_bias_bound: f64,
    /// Max over hypotheses of the n-sample mass outside the good set.
    pub escape_max: f64,
    /// Base-power mass outside the good set.
    pub escape_base: f64,
}

impl BiasReport {
    /// True when the exact identities hold within `tol` and the inequality
    /// items respect their stated bounds with `tol` slack.
    pub fn passes(&self, tol: f64) -> bool {
        self.item1_max_dev <= tol
            && self.item2_max_dev <= tol
            && self.item3_max_dev <= tol
            && self.item4_max_dev <= self.item4_bound + tol
            && self.item5_identity_dev <= tol
            && self.y_bias_max <= self.y_bias_bound + tol
            && self.escape_max <= self.item4_bound + tol
    }
}

/// Audits the bias identities of a built chain.
pub fn verify_bias(chain: &ChainInstance) -> BiasReport {
    let k = chain.k();
    let nx = chain.x_size();
    let ny = chain.yz_size();
    let a = chain.alpha().alpha;
    let scale = 0.5f64.powi(k as i32);
    let xy = chain.xy_joint();
    let xz = chain.xz_joint();

    let mut item1 = 0.0f64;
    let mut item2 = 0.0f64;
    for x in 0..nx {
        let base = chain.x_pmf().prob(x);
        for w in 0..ny {
            let mut closed_y = scale * base;
            let mut closed_z = scale * base;
            for i in 0..k {
                let sign = if w >> i & 1 == 1 { 1.0 } else { -1.0 };
                let ps = chain.psi_val(i, x);
                closed_y *= 1.0 + 0.5 * sign * ps;
                closed_z *= 1.0 + a * sign * ps;
            }
            item1 = item1.max((xy.prob(x, w) - closed_y).abs());
            item2 = item2.max((xz.prob(x, w) - closed_z).abs());
        }
    }

    let mut item3 = 0.0f64;
    for x in (0..nx).filter(|&x| chain.in_truncation(x)) {
        for i in 0..k {
            let lhs = chain.x_pmf().prob(x) * chain.z_prob_plus(i, x);
            let rhs = 0.5 * chain.x_pmf().prob(x) * chain.ratio(i, x);
            item3 = item3.max((lhs - rhs).abs());
        }
    }

    let mut item4 = 0.0f64;
    let mut item5 = 0.0f64;
    let mut y_bias = 0.0f64;
    for i in 0..k {
        let z_dev = (chain.z_i_plus(i) - 0.5).abs();
        let y_dev = (chain.y_i_plus(i) - 0.5).abs();
        item4 = item4.max(z_dev);
        item5 = item5.max((y_dev - z_dev / (2.0 * a)).abs());
        y_bias = y_bias.max(y_dev);
    }

    let family = chain.family();
    let escape_max = (0..k)
        .map(|i| truncation_escape_mass(family, chain.n(), a, Some(i)).unwrap_or(f64::NAN))
        .fold(0.0f64, f64::max);
    let escape_base =
        truncation_escape_mass(family, chain.n(), a, None).unwrap_or(f64::NAN);

    BiasReport {
        item1_max_dev: item1,
        item2_max_dev: item2,
        item3_max_dev: item3,
        item4_max_dev: item4,
        item4_bound: a * a / k as f64,
        item5_identity_dev: item5,
        y_bias_max: y_bias,
        y_bias_bound: a / (2.0 * k as f64),
        escape_max,
        escape_base,
    }
}

/// `k - H(Y)` in bits; nonnegative, and small when the clipped biases are.
pub fn entropy_deficit(chain: &ChainInstance) -> f64 {
    chain.k() as f64 - entropy(&chain.y_marginal())
}

/// Result of reducing a general centered family to binary-centered form.
#[derive(Clone, Debug)]
pub struct CdReduction {
    /// Binary-centered family on `{-1,+1}^k` with `mu_i = mu_0 (1 + rho x_i)`.
    pub bcd: CenteredFamily,
    /// Channel from the original space to `{-1,+1}^k`.
    pub forward: Channel,
    /// Channel back from `{-1,+1}^k` that reproduces each original
    /// distribution from its binary counterpart.
    pub back: Channel,
}

/// Reduces a centered family to binary-centered form: coordinate `i` of the
/// image is +1 with probability `(ratio_i(y) - (1 - rho)) / (2 rho)`, the
/// base is the pushforward of the original base, and the reverse channel is
/// the Bayes inverse against the base pair.
pub fn reduce_cd_to_bcd(eta: &CenteredFamily) -> Result<CdReduction> {
    let k = eta.k();
    let m = eta.base().len();
    let rho = eta.rho();
    let nx = 1u128 << k;
    if nx.checked_mul(m as u128).map_or(true, |t| t > u128::from(ATOM_BUDGET)) {
        return Err(Error::AtomBudgetExceeded {
            required: nx.saturating_mul(m as u128),
            budget: ATOM_BUDGET,
        });
    }
    let nx = nx as usize;
    let mut plus_probs = vec![vec![0.0f64; m]; k];
    for i in 0..k {
        for y in 0..m {
            let q = (eta.ratio(i, y) - (1.0 - rho)) / (2.0 * rho);
            if !(-MASS_TOL..=1.0 + MASS_TOL).contains(&q) {
                return Err(Error::NotCentered {
                    i,
                    index: y,
                    deviation: (eta.ratio(i, y) - 1.0).abs(),
                    rho,
                });
            }
            plus_probs[i][y] = q.clamp(0.0, 1.0);
        }
    }
    let mut probs = Vec::with_capacity(m * nx);
    for y in 0..m {
        for x in 0..nx {
            let mut p = 1.0f64;
            for (i, plus) in plus_probs.iter().enumerate() {
                p *= if x >> i & 1 == 1 {
                    plus[y]
                } else {
                    1.0 - plus[y]
                };
            }
            probs.push(p);
        }
    }
    let forward = Channel::new(m, SpaceKind::Binary { d: k }, probs)?;
    let mu0 = compose(&forward, eta.base())?;
    let mut alternatives = Vec::with_capacity(k);
    for i in 0..k {
        let mass: Vec<f64> = (0..nx)
            .map(|x| {
                let sign = if x >> i & 1 == 1 { 1.0 } else { -1.0 };
                mu0.prob(x) * (1.0 + rho * sign)
            })
            .collect();
        alternatives.push(Pmf::new(SpaceKind::Binary { d: k }, mass)?);
    }
    let bcd = CenteredFamily::new(mu0.clone(), alternatives, rho, None)?;
    let mut back_probs = Vec::with_capacity(nx * m);
    for x in 0..nx {
        for y in 0..m {
            back_probs.push(forward.prob(y, x) * eta.base().prob(y) / mu0.prob(x));
        }
    }
    let back = Channel::new(nx, eta.base().kind(), back_probs)?;
    for i in 0..k {
        let reproduced = compose(&back, bcd.alternative(i))?;
        for y in 0..m {
            let dev = (reproduced.prob(y) - eta.alternative(i).prob(y)).abs();
            if dev > 1e-10 {
                return Err(Error::Internal {
                    detail: format!("back channel misses distribution {i} at atom {y} by {dev}"),
                });
            }
        }
    }
    Ok(CdReduction { bcd, forward, back })
}

/// `E_base prod_{i in S} (ratio_i - 1)` for one subset of hypotheses.
pub fn centered_moment(family: &CenteredFamily, subset: &[usize]) -> f64 {
    neumaier_sum((0..family.base().len()).map(|y| {
        let mut prod = family.base().prob(y);
        for &i in subset {
            prod *= family.ratio(i, y) - 1.0;
        }
        prod
    }))
}

/// Largest deviation between the centered moments of two families over all
/// hypothesis subsets of size 1..=max_order.
pub fn moment_preservation_max_dev(
    a: &CenteredFamily,
    b: &CenteredFamily,
    max_order: usize,
) -> Result<f64> {
    if a.k() != b.k() {
        return Err(Error::SpaceMismatch);
    }
    let mut worst = 0.0f64;
    for order in 1..=max_order.min(a.k()) {
        for combo in Combinations::new(a.k(), order) {
            let dev = (centered_moment(a, &combo) - centered_moment(b, &combo)).abs();
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}

/// Diagnostic comparing the summed squared Hellinger distance moved by a
/// transcript channel against `n rho^2 log2(k^2/(n rho^2)) (I + 1)`.
#[derive(Clone, Copy, Debug)]
pub struct MainAudit {
    /// `sum_i H^2(transcript under base^n, transcript under alt_i^n)`.
    pub hellinger_sum: f64,
    /// `I(transcript; X)` under the base power, in bits.
    pub info: f64,
    /// `n rho^2 log2(k^2/(n rho^2)) (info + 1)`.
    pub bracket: f64,
    /// `hellinger_sum / bracket` when the bracket is positive.
    pub ratio: Option<f64>,
}

/// Computes the transcript-channel audit; no constant is asserted.
pub fn lemma_main_audit(chain: &ChainInstance, pi_channel: &Channel) -> Result<MainAudit> {
    if pi_channel.in_size() != chain.x_size() {
        return Err(Error::SpaceMismatch);
    }
    let push0 = compose(pi_channel, chain.x_pmf())?;
    let mut hellinger_sum = 0.0f64;
    for i in 0..chain.k() {
        let push_i = compose(pi_channel, &chain.alternative_power(i))?;
        hellinger_sum += hellinger_sq(&push0, &push_i)?;
    }
    let info = mutual_info(&joint(chain.x_pmf(), pi_channel)?);
    let n = chain.n() as f64;
    let k = chain.k() as f64;
    let rho = chain.family().rho();
    let bracket = n * rho * rho * (k * k / (n * rho * rho)).log2() * (info + 1.0);
    let ratio = if bracket > 0.0 {
        Some(hellinger_sum / bracket)
    } else {
        None
    };
    Ok(MainAudit {
        hellinger_sum,
        info,
        bracket,
        ratio,
    })
}

/// Margins for one Z coordinate along the transcript inequality chain.
#[derive(Clone, Copy, Debug)]
pub struct CoordMargins {
    /// Mixture contraction margin for `(P_{T|Z_i=-1}, P_{T|Z_i=+1})`.
    pub mix: f64,
    /// Binary-conditioning margin for the `(Z_i, T)` joint.
    pub zzi: f64,
    /// Strong data-processing margin for `(T, Y_i)` with `q = 2 alpha`.
    pub sdpi: f64,
}

/// Term-by-term audit of the inequality chain from conditioned transcript
/// distances down to per-coordinate information.
#[derive(Clone, Debug)]
pub struct ChainIneqAudit {
    pub per_coordinate: Vec<CoordMargins>,
    /// `sum_i H^2(P_T, P_{T|Z_i=+1})`.
    pub mix_sum: f64,
    /// `sum_i H^2(P_{T|Z_i=-1}, P_{T|Z_i=+1})`.
    pub cond_sum: f64,
    /// `sum_i I(T; Z_i)` in bits.
    pub info_sum: f64,
}

impl ChainIneqAudit {
    pub fn min_margin(&self) -> f64 {
        self.per_coordinate
            .iter()
            .flat_map(|m| [m.mix, m.zzi, m.sdpi])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Runs the inequality-chain audit for a transcript channel on X.
pub fn chain_inequality_audit(
    chain: &ChainInstance,
    pi_channel: &Channel,
) -> Result<ChainIneqAudit> {
    if pi_channel.in_size() != chain.x_size() {
        return Err(Error::SpaceMismatch);
    }
    let npi = pi_channel.out_size();
    let nx = chain.x_size();
    let q = 2.0 * chain.alpha().alpha;
    let mut per_coordinate = Vec::with_capacity(chain.k());
    let mut mix_sum = 0.0f64;
    let mut cond_sum = 0.0f64;
    let mut info_sum = 0.0f64;
    for i in 0..chain.k() {
        let mut zi_pi = vec![0.0f64; 2 * npi];
        let mut pi_yi = vec![0.0f64; npi * 2];
        for x in 0..nx {
            let base = chain.x_pmf().prob(x);
            let zp = chain.z_prob_plus(i, x);
            let yp = chain.y_prob_plus(i, x);
            for t in 0..npi {
                let w = base * pi_channel.prob(x, t);
                zi_pi[t] += w * (1.0 - zp);
                zi_pi[npi + t] += w * zp;
                pi_yi[t * 2] += w * (1.0 - yp);
                pi_yi[t * 2 + 1] += w * yp;
            }
        }
        let zi_pi = JointPmf::new(SpaceKind::Binary { d: 1 }, pi_channel.out_kind(), zi_pi)?;
        let pi_yi = JointPmf::new(pi_channel.out_kind(), SpaceKind::Binary { d: 1 }, pi_yi)?;
        let minus = zi_pi
            .conditional_b(0)
            .ok_or(Error::DegenerateMarginal)?;
        let plus = zi_pi
            .conditional_b(1)
            .ok_or(Error::DegenerateMarginal)?;
        let lambda = zi_pi.marginal_a().prob(1);
        let mix = mix_contraction_margin(&minus, &plus, lambda)?;
        let zzi = zzi_margin(&zi_pi)?;
        let sdpi = sdpi_margin(&pi_yi, q)?;
        let marginal = zi_pi.marginal_b();
        mix_sum += hellinger_sq(&marginal, &plus)?;
        cond_sum += hellinger_sq(&minus, &plus)?;
        info_sum += mutual_info(&zi_pi);
        per_coordinate.push(CoordMargins { mix, zzi, sdpi });
    }
    Ok(ChainIneqAudit {
        per_coordinate,
        mix_sum,
        cond_sum,
        info_sum,
    })
}
