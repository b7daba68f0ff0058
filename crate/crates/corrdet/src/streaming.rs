//! Sequential multi-pass algorithms under an exact bit budget: a fixed-width
//! bit-vector state, a budget-auditing runner, and the group-scan detector
//! that sweeps hypothesis counters through whatever memory it is given.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::finite_dist::{monomial_at, CenteredFamily, Pmf, SubsetCollection};
use crate::util::mix_seed;

/// Smallest width in bits that distinguishes `values` distinct values.
pub fn bits_for(values: usize) -> usize {
    if values <= 1 {
        0
    } else {
        (usize::BITS - (values - 1).leading_zeros()) as usize
    }
}

/// Fixed-length bit vector; the entire memory of a streaming algorithm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitState {
    len: usize,
    words: Vec<u64>,
}

impl BitState {
    pub fn zeros(len: usize) -> Self {
        BitState {
            len,
            words: vec![0u64; len.div_ceil(64)],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Reads `width <= 64` bits starting at `offset`, little-endian.
    pub fn get_field(&self, offset: usize, width: usize) -> u64 {
        assert!(width <= 64 && offset + width <= self.len, "field out of range");
        if width == 0 {
            return 0;
        }
        let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        let w = offset / 64;
        let b = offset % 64;
        let mut v = self.words[w] >> b;
        if b + width > 64 {
            v |= self.words[w + 1] << (64 - b);
        }
        v & mask
    }

    /// Writes `width` bits at `offset`; `value` must fit in `width` bits.
    pub fn set_field(&mut self, offset: usize, width: usize, value: u64) {
        assert!(width <= 64 && offset + width <= self.len, "field out of range");
        if width == 0 {
            return;
        }
        let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        assert!(value <= mask, "value does not fit the field");
        let w = offset / 64;
        let b = offset % 64;
        self.words[w] = (self.words[w] & !(mask << b)) | (value << b);
        if b + width > 64 {
            let high = width - (64 - b);
            let high_mask = (1u64 << high) - 1;
            self.words[w + 1] = (self.words[w + 1] & !high_mask) | (value >> (64 - b));
        }
    }

    pub fn get_bit(&self, idx: usize) -> bool {
        self.get_field(idx, 1) == 1
    }

    pub fn set_bit(&mut self, idx: usize, v: bool) {
        self.set_field(idx, 1, u64::from(v));
    }

    /// Little-endian byte serialization, `ceil(len/8)` bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len.div_ceil(8));
        for i in 0..self.len.div_ceil(8) {
            let w = i / 8;
            let shift = (i % 8) * 8;
            out.push((self.words[w] >> shift) as u8);
        }
        out
    }

    pub fn from_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::ArgOutOfRange {
                name: "bytes",
                value: bytes.len() as f64,
                expected: "ceil(len/8) bytes",
            });
        }
        let mut state = BitState::zeros(len);
        for (i, &byte) in bytes.iter().enumerate() {
            let w = i / 8;
            let shift = (i % 8) * 8;
            state.words[w] |= (byte as u64) << shift;
        }
        let tail = len % 64;
        if tail != 0 {
            let last = state.words.len() - 1;
            let mask = (1u64 << tail) - 1;
            if state.words[last] & !mask != 0 {
                return Err(Error::ArgOutOfRange {
                    name: "bytes",
                    value: len as f64,
                    expected: "padding bits past `len` must be zero",
                });
            }
        }
        Ok(state)
    }
}

/// A sequential algorithm whose whole memory is a fixed-width [`BitState`],
/// updated one sample at a time at a global stream position.
pub trait StreamAlgorithm {
    /// Declared memory budget in bits; every state must be exactly this long.
    fn state_bits(&self) -> usize;

    /// The pass count the algorithm was designed for.
    fn passes(&self) -> usize;

    fn init(&self) -> BitState;

    /// `position` is the 0-based index into the concatenated multi-pass
    /// stream (`pass * t + index`).
    fn update(&self, sample: usize, state: &BitState, position: u64) -> BitState;

    fn finish(&self, state: &BitState) -> Option<usize>;
}

/// Resource accounting for one streaming run.
#[derive(Clone, Copy, Debug)]
pub struct StreamAudit {
    pub max_state_bits: usize,
    pub steps: u64,
    pub samples: usize,
    pub passes: usize,
}

/// Draws `count` atom indices from `pmf` by inverse CDF; one uniform draw
/// per sample, so a longer draw from the same seed extends a shorter one.
pub fn draw_samples(pmf: &Pmf, seed: u64, count: usize) -> Vec<usize> {
    let mut cum = Vec::with_capacity(pmf.len());
    let mut acc = 0.0f64;
    for &p in pmf.mass() {
        acc += p;
        cum.push(acc);
    }
    let total = acc;
    let top = pmf.len() - 1;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: f64 = rng.gen::<f64>() * total;
            cum.partition_point(|&c| c <= u).min(top)
        })
        .collect()
}

/// Materializes `t` seeded samples once and replays them in order for
/// `passes` passes, auditing the state width after every update.
pub fn run_stream(
    alg: &dyn StreamAlgorithm,
    sampler: &Pmf,
    seed: u64,
    t: usize,
    passes: usize,
) -> Result<(Option<usize>, StreamAudit)> {
    if t < 1 {
        return Err(Error::ArgOutOfRange {
            name: "t",
            value: t as f64,
            expected: ">= 1",
        });
    }
    if passes < 1 {
        return Err(Error::ArgOutOfRange {
            name: "passes",
            value: passes as f64,
            expected: ">= 1",
        });
    }
    let budget = alg.state_bits();
    let samples = draw_samples(sampler, seed, t);
    let mut state = alg.init();
    if state.len() != budget {
        return Err(Error::StateSizeViolation {
            step: 0,
            bits: state.len(),
            budget,
        });
    }
    let mut max_bits = state.len();
    for pass in 0..passes {
        for (i, &x) in samples.iter().enumerate() {
            let position = pass as u64 * t as u64 + i as u64;
            state = alg.update(x, &state, position);
            max_bits = max_bits.max(state.len());
            if state.len() != budget {
                return Err(Error::StateSizeViolation {
                    step: position,
                    bits: state.len(),
                    budget,
                });
            }
        }
    }
    let audit = StreamAudit {
        max_state_bits: max_bits,
        steps: passes as u64 * t as u64,
        samples: t,
        passes,
    };
    Ok((alg.finish(&state), audit))
}

/// Hypothesis list and statistical targets for the group-scan detector.
#[derive(Clone, Debug)]
pub struct GroupScanConfig {
    hypotheses: SubsetCollection,
    rho: f64,
    delta: f64,
}

impl GroupScanConfig {
    pub fn new(hypotheses: SubsetCollection, rho: f64, delta: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::ArgOutOfRange {
                name: "rho",
                value: rho,
                expected: "(0, 1)",
            });
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::ArgOutOfRange {
                name: "delta",
                value: delta,
                expected: "(0, 1)",
            });
        }
        if hypotheses.is_empty() {
            return Err(Error::TooFewHypotheses { got: 0, min: 1 });
        }
        Ok(GroupScanConfig {
            hypotheses,
            rho,
            delta,
        })
    }

    pub fn hypotheses(&self) -> &SubsetCollection {
        &self.hypotheses
    }

    pub fn k(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Per-phase sample count `ceil((8/rho^2) ln(4k/delta))`.
    pub fn phase_len(&self) -> usize {
        let k = self.k() as f64;
        ((8.0 / (self.rho * self.rho)) * (4.0 * k / self.delta).ln()).ceil() as usize
    }

    /// Width of one counter slot: hypothesis id plus an exact signed sum
    /// over a phase, offset-encoded.
    pub fn slot_bits(&self) -> usize {
        bits_for(self.k()) + bits_for(2 * self.phase_len() + 1)
    }

    /// Width of the in-state phase register, including the two terminal
    /// sentinel values.
    pub fn phase_bits(&self) -> usize {
        bits_for(self.k() + 2)
    }

    /// Smallest workable memory budget: the phase register plus one slot.
    pub fn min_state_bits(&self) -> usize {
        self.phase_bits() + self.slot_bits()
    }
}

/// Total samples needed to scan every hypothesis once: one phase per group
/// of `slots` hypotheses.
pub fn required_samples(cfg: &GroupScanConfig, slots: usize) -> Result<usize> {
    if slots < 1 {
        return Err(Error::ArgOutOfRange {
            name: "slots",
            value: slots as f64,
            expected: ">= 1",
        });
    }
    Ok(cfg.k().div_ceil(slots) * cfg.phase_len())
}

/// Per-pass samples when the phases are split evenly across `passes`.
pub fn required_samples_per_pass(
    cfg: &GroupScanConfig,
    slots: usize,
    passes: usize,
) -> Result<usize> {
    if passes < 1 {
        return Err(Error::ArgOutOfRange {
            name: "passes",
            value: passes as f64,
            expected: ">= 1",
        });
    }
    Ok(required_samples(cfg, slots)?.div_ceil(passes))
}

/// The scanning detector: estimates hypothesis means in batches of `slots`
/// simultaneous exact counters, one batch per phase of `phase_len` fresh
/// stream positions, and accepts the first hypothesis whose |mean| reaches
/// rho/2. Its whole memory is the phase register plus the slot array.
#[derive(Clone, Debug)]
pub struct GroupScan {
    cfg: GroupScanConfig,
    state_bits: usize,
    slots: usize,
    passes: usize,
}

impl GroupScan {
    pub fn cfg(&self) -> &GroupScanConfig {
        &self.cfg
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Number of phases needed to cover every hypothesis.
    pub fn phases(&self) -> usize {
        self.cfg.k().div_ceil(self.slots)
    }

    pub fn with_passes(mut self, passes: usize) -> Self {
        self.passes = passes.max(1);
        self
    }

    fn id_bits(&self) -> usize {
        bits_for(self.cfg.k())
    }

    fn sum_bits(&self) -> usize {
        bits_for(2 * self.cfg.phase_len() + 1)
    }

    fn slot_offset(&self, q: usize) -> usize {
        self.cfg.phase_bits() + q * self.cfg.slot_bits()
    }
}

/// Sizes the scanner for a memory budget: as many slots as fit after the
/// phase register (capped at `k`), rejecting budgets below one slot.
pub fn build_group_scan(cfg: &GroupScanConfig, s: usize) -> Result<GroupScan> {
    let phase_bits = cfg.phase_bits();
    let slot_bits = cfg.slot_bits();
    let slots = s.saturating_sub(phase_bits) / slot_bits;
    if slots == 0 {
        return Err(Error::MemoryTooSmall {
            budget: s,
            min_bits: cfg.min_state_bits(),
            detail: "phase register plus one counter slot",
        });
    }
    Ok(GroupScan {
        cfg: cfg.clone(),
        state_bits: s,
        slots: slots.min(cfg.k()),
        passes: 1,
    })
}

impl StreamAlgorithm for GroupScan {
    fn state_bits(&self) -> usize {
        self.state_bits
    }

    fn passes(&self) -> usize {
        self.passes
    }

    fn init(&self) -> BitState {
        BitState::zeros(self.state_bits)
    }

    fn update(&self, sample: usize, state: &BitState, position: u64) -> BitState {
        let mut next = state.clone();
        let k = self.cfg.k();
        let phase_bits = self.cfg.phase_bits();
        let phase = next.get_field(0, phase_bits) as usize;
        if phase >= k {
            return next;
        }
        let t0 = self.cfg.phase_len() as u64;
        if position / t0 != phase as u64 {
            return next;
        }
        let offset = (position - phase as u64 * t0) as usize;
        let id_bits = self.id_bits();
        let sum_bits = self.sum_bits();
        let active = self.slots.min(k - phase * self.slots);
        if offset == 0 {
            for q in 0..active {
                let base = self.slot_offset(q);
                next.set_field(base, id_bits, (phase * self.slots + q) as u64);
                next.set_field(base + id_bits, sum_bits, t0);
            }
        }
        for q in 0..active {
            let base = self.slot_offset(q);
            let id = next.get_field(base, id_bits) as usize;
            let prod = monomial_at(sample, &self.cfg.hypotheses.members()[id]) as i64;
            let sum = next.get_field(base + id_bits, sum_bits) as i64 - t0 as i64 + prod;
            next.set_field(base + id_bits, sum_bits, (sum + t0 as i64) as u64);
        }
        if offset + 1 == t0 as usize {
            let threshold = self.cfg.rho * t0 as f64 / 2.0;
            let mut accepted = None;
            for q in 0..active {
                let base = self.slot_offset(q);
                let id = next.get_field(base, id_bits) as usize;
                let sum = next.get_field(base + id_bits, sum_bits) as i64 - t0 as i64;
                if (sum as f64).abs() >= threshold {
                    accepted = Some(id);
                    break;
                }
            }
            match accepted {
                Some(id) => {
                    next.set_field(0, phase_bits, (k + 1) as u64);
                    next.set_field(self.slot_offset(0), id_bits, id as u64);
                }
                None => {
                    let np = phase + 1;
                    let reg = if np < self.phases() { np } else { k };
                    next.set_field(0, phase_bits, reg as u64);
                }
            }
        }
        next
    }

    fn finish(&self, state: &BitState) -> Option<usize> {
        let phase = state.get_field(0, self.cfg.phase_bits()) as usize;
        if phase == self.cfg.k() + 1 {
            Some(state.get_field(self.slot_offset(0), self.id_bits()) as usize)
        } else {
            None
        }
    }
}

/// Fraction of seeded trials in which the scanner under budget `s` outputs
/// exactly `planted` (`Some(i)` when sampling from alternative `i`, `None`
/// when sampling from the base).
pub fn success_rate(
    cfg: &GroupScanConfig,
    s: usize,
    family: &CenteredFamily,
    planted: Option<usize>,
    t: usize,
    passes: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials < 1 {
        return Err(Error::ArgOutOfRange {
            name: "trials",
            value: trials as f64,
            expected: ">= 1",
        });
    }
    if family.k() != cfg.k() {
        return Err(Error::SpaceMismatch);
    }
    if let Some(i) = planted {
        if i >= cfg.k() {
            return Err(Error::HypothesisOutOfRange {
                index: i,
                k: cfg.k(),
            });
        }
    }
    let alg = build_group_scan(cfg, s)?;
    let sampler = match planted {
        Some(i) => family.alternative(i),
        None => family.base(),
    };
    let mut hits = 0usize;
    for trial in 0..trials {
        let (out, _) = run_stream(&alg, sampler, mix_seed(seed, trial as u64), t, passes)?;
        if out == planted {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepStatus {
    Ok,
    Infeasible,
    TargetUnmet,
}

/// One point of the memory/sample trade-off sweep.
#[derive(Clone, Copy, Debug)]
pub struct SweepRecord {
    pub s_bits: usize,
    pub slots: usize,
    pub passes: usize,
    /// Minimal per-pass samples reaching the success target (0 if none).
    pub t: usize,
    pub total_samples: usize,
    pub ts_ell: u128,
    pub success_rate: f64,
    pub status: SweepStatus,
}

const SWEEP_TARGET: f64 = 0.9;

fn sweep_rate(
    cfg: &GroupScanConfig,
    alg: &GroupScan,
    family: &CenteredFamily,
    t: usize,
    passes: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let mut hits = 0usize;
    for trial in 0..trials {
        let mut label_rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, 2 * trial as u64 + 1));
        let idx = label_rng.gen_range(0..cfg.k());
        let sample_seed = mix_seed(seed, 2 * trial as u64);
        let (out, _) = run_stream(alg, family.alternative(idx), sample_seed, t, passes)?;
        if out == Some(idx) {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// For each memory budget and pass count, finds the minimal per-pass sample
/// count reaching 90% success over seeded trials with a random planted
/// hypothesis per trial. The search runs on the doubling/halving grid
/// anchored at the scanner's required sample count.
pub fn sweep_tradeoff(
    cfg: &GroupScanConfig,
    budgets: &[usize],
    passes_list: &[usize],
    family: &CenteredFamily,
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepRecord>> {
    if budgets.is_empty() {
        return Err(Error::ArgOutOfRange {
            name: "budgets",
            value: 0.0,
            expected: "nonempty",
        });
    }
    if trials < 1 {
        return Err(Error::ArgOutOfRange {
            name: "trials",
            value: trials as f64,
            expected: ">= 1",
        });
    }
    if family.k() != cfg.k() {
        return Err(Error::SpaceMismatch);
    }
    let mut records = Vec::new();
    for &s in budgets {
        for &passes in passes_list {
            let alg = match build_group_scan(cfg, s) {
                Ok(a) => a,
                Err(Error::MemoryTooSmall { .. }) => {
                    records.push(SweepRecord {
                        s_bits: s,
                        slots: 0,
                        passes,
                        t: 0,
                        total_samples: 0,
                        ts_ell: 0,
                        success_rate: 0.0,
                        status: SweepStatus::Infeasible,
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            let t_req = required_samples_per_pass(cfg, alg.slots(), passes)?;
            let mut t = t_req;
            let mut rate = sweep_rate(cfg, &alg, family, t, passes, trials, seed)?;
            let mut status = SweepStatus::Ok;
            if rate < SWEEP_TARGET {
                loop {
                    if t >= 8 * t_req {
                        status = SweepStatus::TargetUnmet;
                        break;
                    }
                    t *= 2;
                    rate = sweep_rate(cfg, &alg, family, t, passes, trials, seed)?;
                    if rate >= SWEEP_TARGET {
                        break;
                    }
                }
            } else {
                while t > 1 {
                    let lower = t / 2;
                    let lower_rate = sweep_rate(cfg, &alg, family, lower, passes, trials, seed)?;
                    if lower_rate >= SWEEP_TARGET {
                        t = lower;
                        rate = lower_rate;
                    } else {
                        break;
                    }
                }
            }
            records.push(SweepRecord {
                s_bits: s,
                slots: alg.slots(),
                passes,
                t,
                total_samples: t * passes,
                ts_ell: t as u128 * s as u128 * passes as u128,
                success_rate: rate,
                status,
            });
        }
    }
    Ok(records)
}
