//! Multi-party broadcast protocols with exact bit accounting: a turn-based
//! runner, the grouped sum-broadcast detector, the streaming-to-protocol
//! reduction, and exact transcript-distribution analysis on enumerable
//! instances.

use crate::error::{Error, Result};
use crate::finite_dist::{monomial_at, CenteredFamily, Pmf, SpaceKind, SubsetCollection};
use crate::infotheory::{hellinger_sq, tv};
use crate::streaming::{bits_for, BitState, StreamAlgorithm};
use crate::util::{mix_seed, neumaier_sum, CompensatedSum};

/// Ordered broadcast record of one protocol run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    messages: Vec<(usize, BitState)>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    pub fn messages(&self) -> &[(usize, BitState)] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Total communication so far: the sum of message lengths in bits.
    pub fn bit_count(&self) -> usize {
        self.messages.iter().map(|(_, m)| m.len()).sum()
    }

    /// Canonical byte encoding, usable as a map key.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (party, msg) in &self.messages {
            out.extend_from_slice(&(*party as u32).to_le_bytes());
            out.extend_from_slice(&(msg.len() as u32).to_le_bytes());
            out.extend_from_slice(&msg.to_bytes());
        }
        out
    }
}

/// A blackboard protocol: the speaker order and the final output depend only
/// on the transcript, and a message depends only on the speaker's own input,
/// the transcript, and the run's externalized randomness.
pub trait Protocol {
    fn parties(&self) -> usize;

    fn samples_per_party(&self) -> usize;

    /// Declared worst-case communication in bits; enforced during runs.
    fn worst_case_bits(&self) -> usize;

    /// Next party to speak, or `None` to halt.
    fn next_speaker(&self, transcript: &Transcript) -> Option<usize>;

    fn message(
        &self,
        party: usize,
        input: &[usize],
        transcript: &Transcript,
        seed: u64,
    ) -> BitState;

    fn output(&self, transcript: &Transcript) -> Option<usize>;
}

/// Runs a protocol on per-party inputs (atom indices), enforcing the
/// declared communication budget. Deterministic given `seed`.
pub fn run_protocol(
    p: &dyn Protocol,
    inputs: &[Vec<usize>],
    seed: u64,
) -> Result<(Option<usize>, Transcript)> {
    if inputs.len() != p.parties() {
        return Err(Error::ArgOutOfRange {
            name: "inputs",
            value: inputs.len() as f64,
            expected: "one sample set per party",
        });
    }
    for set in inputs {
        if set.len() != p.samples_per_party() {
            return Err(Error::ArgOutOfRange {
                name: "inputs",
                value: set.len() as f64,
                expected: "n samples per party",
            });
        }
    }
    let mut transcript = Transcript::new();
    let message_cap = p.worst_case_bits() + 8 * p.parties() + 16;
    while let Some(party) = p.next_speaker(&transcript) {
        if party >= p.parties() {
            return Err(Error::Internal {
                detail: format!("speaker rule chose party {party} of {}", p.parties()),
            });
        }
        let msg = p.message(
            party,
            &inputs[party],
            &transcript,
            mix_seed(seed, transcript.len() as u64),
        );
        transcript.messages.push((party, msg));
        if transcript.bit_count() > p.worst_case_bits() {
            return Err(Error::ProtocolBudgetExceeded {
                used: transcript.bit_count(),
                declared: p.worst_case_bits(),
            });
        }
        if transcript.len() > message_cap {
            return Err(Error::Internal {
                detail: "speaker rule does not halt".to_string(),
            });
        }
    }
    let label = p.output(&transcript);
    Ok((label, transcript))
}

/// The grouped detector: machines are split round-robin into groups, each
/// group is assigned a chunk of hypotheses, and every machine broadcasts the
/// exact integer sum of each assigned hypothesis product over its own
/// samples. The output is the hypothesis with the largest aggregated
/// absolute mean, lowest index on ties.
#[derive(Clone, Debug)]
pub struct GroupBroadcast {
    hypotheses: SubsetCollection,
    rho: f64,
    delta: f64,
    m: usize,
    n: usize,
    sum_bits: usize,
    pairs_per_machine: usize,
    groups: usize,
    phase_len: usize,
}

impl GroupBroadcast {
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

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn pairs_per_machine(&self) -> usize {
        self.pairs_per_machine
    }

    pub fn sum_bits(&self) -> usize {
        self.sum_bits
    }

    /// The per-group sample requirement met at build time.
    pub fn phase_len(&self) -> usize {
        self.phase_len
    }

    /// Closed-form total communication: `m * pairs_per_machine * sum_bits`.
    pub fn total_bits(&self) -> usize {
        self.m * self.pairs_per_machine * self.sum_bits
    }

    fn group_size(&self, g: usize) -> usize {
        self.m / self.groups + usize::from(g < self.m % self.groups)
    }

    fn chunk(&self, g: usize) -> std::ops::Range<usize> {
        let lo = g * self.pairs_per_machine;
        lo..self.k().min(lo + self.pairs_per_machine)
    }
}

/// Sizes the grouped detector; rejects per-machine budgets below one counter
/// and machine counts whose smallest group cannot reach the per-group sample
/// requirement `ceil((8/rho^2) ln(4k/delta))`.
pub fn build_group_broadcast(
    hypotheses: SubsetCollection,
    rho: f64,
    delta: f64,
    m: usize,
    n: usize,
    s_per_machine: usize,
) -> Result<GroupBroadcast> {
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
    if m < 1 || n < 1 {
        return Err(Error::ArgOutOfRange {
            name: "m,n",
            value: 0.0,
            expected: "both positive",
        });
    }
    if hypotheses.is_empty() {
        return Err(Error::TooFewHypotheses { got: 0, min: 1 });
    }
    let k = hypotheses.len();
    let sum_bits = bits_for(2 * n + 1);
    let pairs_per_machine = (s_per_machine / sum_bits).min(k);
    if pairs_per_machine == 0 {
        return Err(Error::MachineBudgetTooSmall {
            budget: s_per_machine,
            min_bits: sum_bits,
        });
    }
    let groups = k.div_ceil(pairs_per_machine);
    let phase_len =
        ((8.0 / (rho * rho)) * (4.0 * k as f64 / delta).ln()).ceil() as usize;
    if (m / groups) * n < phase_len {
        return Err(Error::MachinesTooFew {
            m,
            min_m: groups * phase_len.div_ceil(n),
        });
    }
    Ok(GroupBroadcast {
        hypotheses,
        rho,
        delta,
        m,
        n,
        sum_bits,
        pairs_per_machine,
        groups,
        phase_len,
    })
}

impl Protocol for GroupBroadcast {
    fn parties(&self) -> usize {
        self.m
    }

    fn samples_per_party(&self) -> usize {
        self.n
    }

    fn worst_case_bits(&self) -> usize {
        self.total_bits()
    }

    fn next_speaker(&self, transcript: &Transcript) -> Option<usize> {
        let next = transcript.len();
        (next < self.m).then_some(next)
    }

    fn message(
        &self,
        party: usize,
        input: &[usize],
        _transcript: &Transcript,
        _seed: u64,
    ) -> BitState {
        let g = party % self.groups;
        let mut bits = BitState::zeros(self.pairs_per_machine * self.sum_bits);
        for (slot, id) in self.chunk(g).enumerate() {
            let member = &self.hypotheses.members()[id];
            let sum: i64 = input
                .iter()
                .map(|&x| monomial_at(x, member) as i64)
                .sum();
            bits.set_field(slot * self.sum_bits, self.sum_bits, (sum + self.n as i64) as u64);
        }
        bits
    }

    fn output(&self, transcript: &Transcript) -> Option<usize> {
        let mut totals = vec![0i64; self.k()];
        for (party, msg) in transcript.messages() {
            let g = party % self.groups;
            for (slot, id) in self.chunk(g).enumerate() {
                totals[id] +=
                    msg.get_field(slot * self.sum_bits, self.sum_bits) as i64 - self.n as i64;
            }
        }
        let mut best = 0usize;
        let mut best_mean = f64::NEG_INFINITY;
        for id in 0..self.k() {
            let g = id / self.pairs_per_machine;
            let denom = (self.group_size(g) * self.n) as f64;
            let mean = (totals[id] as f64 / denom).abs();
            if mean > best_mean {
                best_mean = mean;
                best = id;
            }
        }
        Some(best)
    }
}

/// Ungated variant for exact analysis: every machine broadcasts the sum of
/// every hypothesis product over its own samples, and the output aggregates
/// all of them. Enumerable at tiny sizes regardless of statistical strength.
#[derive(Clone, Debug)]
pub struct ExhaustiveBroadcast {
    hypotheses: SubsetCollection,
    m: usize,
    n: usize,
    sum_bits: usize,
}

impl ExhaustiveBroadcast {
    pub fn new(hypotheses: SubsetCollection, m: usize, n: usize) -> Result<Self> {
        if m < 1 || n < 1 {
            return Err(Error::ArgOutOfRange {
                name: "m,n",
                value: 0.0,
                expected: "both positive",
            });
        }
        if hypotheses.is_empty() {
            return Err(Error::TooFewHypotheses { got: 0, min: 1 });
        }
        let sum_bits = bits_for(2 * n + 1);
        Ok(ExhaustiveBroadcast {
            hypotheses,
            m,
            n,
            sum_bits,
        })
    }

    pub fn total_bits(&self) -> usize {
        self.m * self.hypotheses.len() * self.sum_bits
    }
}

impl Protocol for ExhaustiveBroadcast {
    fn parties(&self) -> usize {
        self.m
    }

    fn samples_per_party(&self) -> usize {
        self.n
    }

    fn worst_case_bits(&self) -> usize {
        self.total_bits()
    }

    fn next_speaker(&self, transcript: &Transcript) -> Option<usize> {
        let next = transcript.len();
        (next < self.m).then_some(next)
    }

    fn message(
        &self,
        _party: usize,
        input: &[usize],
        _transcript: &Transcript,
        _seed: u64,
    ) -> BitState {
        let k = self.hypotheses.len();
        let mut bits = BitState::zeros(k * self.sum_bits);
        for (slot, member) in self.hypotheses.members().iter().enumerate() {
            let sum: i64 = input
                .iter()
                .map(|&x| monomial_at(x, member) as i64)
                .sum();
            bits.set_field(slot * self.sum_bits, self.sum_bits, (sum + self.n as i64) as u64);
        }
        bits
    }

    fn output(&self, transcript: &Transcript) -> Option<usize> {
        let k = self.hypotheses.len();
        let mut totals = vec![0i64; k];
        for (_, msg) in transcript.messages() {
            for (slot, total) in totals.iter_mut().enumerate() {
                *total += msg.get_field(slot * self.sum_bits, self.sum_bits) as i64
                    - self.n as i64;
            }
        }
        let mut best = 0usize;
        let mut best_total = i64::MIN;
        for (id, &total) in totals.iter().enumerate() {
            if total.abs() > best_total {
                best_total = total.abs();
                best = id;
            }
        }
        Some(best)
    }
}

/// A streaming algorithm simulated by parties holding consecutive shares of
/// the stream: each party runs the update rule over its share and broadcasts
/// the s-bit state, pass by pass.
#[derive(Clone, Debug)]
pub struct StreamProtocol<A: StreamAlgorithm> {
    alg: A,
    t: usize,
    m: usize,
    n: usize,
    active: usize,
}

impl<A: StreamAlgorithm> StreamProtocol<A> {
    pub fn algorithm(&self) -> &A {
        &self.alg
    }

    pub fn stream_len(&self) -> usize {
        self.t
    }

    /// Parties actually holding stream samples: `ceil(t/n)`.
    pub fn active_parties(&self) -> usize {
        self.active
    }
}

/// Wraps a streaming algorithm as a protocol over `m` parties with `n`
/// samples each, of which the first `t` (in party order) form the stream.
pub fn stream_to_protocol<A: StreamAlgorithm>(
    alg: A,
    t: usize,
    m: usize,
    n: usize,
) -> Result<StreamProtocol<A>> {
    if t < 1 || m < 1 || n < 1 {
        return Err(Error::ArgOutOfRange {
            name: "t,m,n",
            value: 0.0,
            expected: "all positive",
        });
    }
    if m * n < t {
        return Err(Error::SamplesTooFew {
            needed: t,
            available: m * n,
        });
    }
    let active = t.div_ceil(n);
    Ok(StreamProtocol { alg, t, m, n, active })
}

impl<A: StreamAlgorithm> Protocol for StreamProtocol<A> {
    fn parties(&self) -> usize {
        self.m
    }

    fn samples_per_party(&self) -> usize {
        self.n
    }

    fn worst_case_bits(&self) -> usize {
        (self.t.div_ceil(self.n) * self.alg.passes() + self.alg.passes()) * self.alg.state_bits()
    }

    fn next_speaker(&self, transcript: &Transcript) -> Option<usize> {
        let idx = transcript.len();
        (idx < self.active * self.alg.passes()).then(|| idx % self.active)
    }

    fn message(
        &self,
        party: usize,
        input: &[usize],
        transcript: &Transcript,
        _seed: u64,
    ) -> BitState {
        let pass = transcript.len() / self.active;
        let mut state = match transcript.messages().last() {
            Some((_, prev)) => prev.clone(),
            None => self.alg.init(),
        };
        let start = party * self.n;
        let share = self.t.min(start + self.n) - start;
        for i in 0..share {
            let position = pass as u64 * self.t as u64 + (start + i) as u64;
            state = self.alg.update(input[i], &state, position);
        }
        state
    }

    fn output(&self, transcript: &Transcript) -> Option<usize> {
        transcript
            .messages()
            .last()
            .and_then(|(_, state)| self.alg.finish(state))
    }
}

/// Exact transcript distributions of a deterministic protocol under the base
/// and every alternative of a family, over the shared transcript alphabet.
#[derive(Clone, Debug)]
pub struct TranscriptDistributions {
    keys: Vec<Vec<u8>>,
    outputs: Vec<Option<usize>>,
    pmfs: Vec<Pmf>,
}

impl TranscriptDistributions {
    /// Number of hypotheses (the family's k).
    pub fn k(&self) -> usize {
        self.pmfs.len() - 1
    }

    /// Size of the shared transcript alphabet.
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[Vec<u8>] {
        &self.keys
    }

    /// Protocol output on the transcript at alphabet position `idx`.
    pub fn output(&self, idx: usize) -> Option<usize> {
        self.outputs[idx]
    }

    /// Transcript pushforward for label `i`: 0 is the base, `i >= 1` is
    /// alternative `i-1`.
    pub fn pmf(&self, i: usize) -> &Pmf {
        &self.pmfs[i]
    }

    pub fn tv(&self, i: usize, j: usize) -> Result<f64> {
        tv(&self.pmfs[i], &self.pmfs[j])
    }

    pub fn hellinger_sq(&self, i: usize, j: usize) -> Result<f64> {
        hellinger_sq(&self.pmfs[i], &self.pmfs[j])
    }

    /// Worst-case identification error: the largest, over alternatives `i`,
    /// probability that the output differs from `i` under alternative `i`.
    pub fn measured_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..self.pmfs.len() {
            let err = neumaier_sum(self.outputs.iter().zip(self.pmfs[i].mass()).filter_map(
                |(&out, &p)| {
                    if out != Some(i - 1) {
                        Some(p)
                    } else {
                        None
                    }
                },
            ));
            worst = worst.max(err);
        }
        worst
    }
}

/// Enumerates every input combination of an `(m, n)` instance and pushes the
/// family's product distributions through a deterministic protocol. The atom
/// combination count `|Omega|^(m n)` must stay within `budget`.
pub fn transcript_distributions(
    p: &dyn Protocol,
    family: &CenteredFamily,
    budget: u64,
) -> Result<TranscriptDistributions> {
    let space = family.space_kind().size();
    let cells = p.parties() * p.samples_per_party();
    let combos = (space as u128)
        .checked_pow(cells as u32)
        .filter(|&c| c <= budget as u128)
        .ok_or(Error::AtomBudgetExceeded {
            required: (space as f64).powi(cells as i32) as u128,
            budget,
        })?;

    use std::collections::BTreeMap;
    let mut table: BTreeMap<Vec<u8>, (Option<usize>, Vec<CompensatedSum>)> = BTreeMap::new();
    let labels = family.k() + 1;
    let mut inputs = vec![vec![0usize; p.samples_per_party()]; p.parties()];
    let mut digits = vec![0usize; cells];
    for combo in 0..combos {
        let mut rem = combo;
        for digit in digits.iter_mut() {
            *digit = (rem % space as u128) as usize;
            rem /= space as u128;
        }
        for (cell, &atom) in digits.iter().enumerate() {
            inputs[cell / p.samples_per_party()][cell % p.samples_per_party()] = atom;
        }
        let (label, transcript) = run_protocol(p, &inputs, 0)?;
        let entry = table
            .entry(transcript.canonical_bytes())
            .or_insert_with(|| (label, vec![CompensatedSum::new(); labels]));
        if entry.0 != label {
            return Err(Error::Internal {
                detail: "output rule disagrees on identical transcripts".to_string(),
            });
        }
        for (i, acc) in entry.1.iter_mut().enumerate() {
            let pmf = if i == 0 {
                family.base()
            } else {
                family.alternative(i - 1)
            };
            acc.add(digits.iter().map(|&a| pmf.prob(a)).product());
        }
    }

    let keys: Vec<Vec<u8>> = table.keys().cloned().collect();
    let outputs: Vec<Option<usize>> = table.values().map(|(out, _)| *out).collect();
    let kind = SpaceKind::Abstract { size: keys.len() };
    let pmfs = (0..labels)
        .map(|i| {
            Pmf::new(
                kind,
                table.values().map(|(_, probs)| probs[i].value()).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TranscriptDistributions {
        keys,
        outputs,
        pmfs,
    })
}

/// Single-label transcript pushforward: label 0 is the base, `i >= 1` is
/// alternative `i-1`.
pub fn transcript_distribution(
    p: &dyn Protocol,
    family: &CenteredFamily,
    label: usize,
    budget: u64,
) -> Result<Pmf> {
    let dists = transcript_distributions(p, family, budget)?;
    if label >= dists.pmfs.len() {
        return Err(Error::HypothesisOutOfRange {
            index: label,
            k: dists.k(),
        });
    }
    Ok(dists.pmfs[label].clone())
}

/// Separation audit on exact transcript distributions: pairwise total
/// variation against `1 - 2 epsilon`, and the Hellinger-sum lower bound
/// `(k-1)(1-2 epsilon)^2 / 8`.
#[derive(Clone, Copy, Debug)]
pub struct SeparationReport {
    pub epsilon: f64,
    /// Smallest pairwise TV between alternative transcripts (1.0 when k < 2).
    pub min_pairwise_tv: f64,
    pub tv_bound: f64,
    pub hellinger_sum: f64,
    pub hellinger_bound: f64,
    pub pairwise_ok: bool,
    pub sum_ok: bool,
}

impl SeparationReport {
    pub fn passes(&self) -> bool {
        self.pairwise_ok && self.sum_ok
    }
}

/// Checks the transcript-separation inequalities for a protocol whose
/// measured identification error is at most `epsilon`.
pub fn tv_separation_check(
    p: &dyn Protocol,
    family: &CenteredFamily,
    epsilon: f64,
    budget: u64,
) -> Result<SeparationReport> {
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::ArgOutOfRange {
            name: "epsilon",
            value: epsilon,
            expected: "[0, 1/2]",
        });
    }
    let dists = transcript_distributions(p, family, budget)?;
    let k = dists.k();
    let tv_bound = 1.0 - 2.0 * epsilon;
    let mut min_tv = 1.0f64;
    for i in 1..=k {
        for j in (i + 1)..=k {
            min_tv = min_tv.min(dists.tv(i, j)?);
        }
    }
    let hellinger_sum = neumaier_sum(
        (1..=k)
            .map(|i| dists.hellinger_sq(0, i))
            .collect::<Result<Vec<_>>>()?,
    );
    let hellinger_bound = (k as f64 - 1.0) * tv_bound * tv_bound / 8.0;
    Ok(SeparationReport {
        epsilon,
        min_pairwise_tv: min_tv,
        tv_bound,
        hellinger_sum,
        hellinger_bound,
        pairwise_ok: k < 2 || min_tv >= tv_bound - 1e-12,
        sum_ok: hellinger_sum >= hellinger_bound - 1e-12,
    })
}
