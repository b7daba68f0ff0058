//! End-to-end acceptance checks, one test per numbered criterion. Each test
//! prints `acceptance N (name): PASS` after its asserts so a `--nocapture`
//! run doubles as a checklist.

use corrdet::finite_dist::{
    build_parity_family, correlation_condition_lhs, Pmf, SpaceKind, SubsetCollection,
};
use corrdet::gaussian::{
    centered_high_order_closed, has_unique_coordinate, high_order_closed, planted_det,
    stack_build, stack_sigma_gate, PlantedCovariance,
};
use corrdet::infotheory::{compose, joint, mutual_info, sdpi_margin, Channel};
use corrdet::lowerbound_chain::{
    build_chain, moment_preservation_max_dev, reduce_cd_to_bcd, rho_gate, solve_alpha, verify_bias,
};
use corrdet::protocol::{
    build_group_broadcast, run_protocol, stream_to_protocol, transcript_distributions,
    tv_separation_check, ExhaustiveBroadcast,
};
use corrdet::streaming::{
    build_group_scan, draw_samples, required_samples, required_samples_per_pass, run_stream,
    sweep_tradeoff, GroupScanConfig, StreamAlgorithm, SweepStatus,
};
use corrdet::suites::{
    closed_collection_grid, collection_agreement_max_dev, gaussian_mc_suite, margin_suite,
    parity_moment_max_dev, random_centered_family, subsets_up_to, CheckStatus, GaussianMcConfig,
    MarginSuiteConfig,
};

fn pass(n: usize, name: &str) {
    println!("acceptance {n} ({name}): PASS");
}

/// All r-element index subsets of 0..n in lexicographic order.
fn index_combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - r {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[test]
fn acceptance_01_parity_subset_moments() {
    for d in 2..=6usize {
        let subsets = subsets_up_to(d, 3);
        let u = SubsetCollection::new(d, subsets.clone()).expect("subset collection");
        for &rho in &[0.1, 0.5, 0.9] {
            let family = build_parity_family(&u, rho, d).expect("parity family");
            let dev = parity_moment_max_dev(&family, &subsets).expect("moment scan");
            assert!(
                dev <= 1e-12,
                "subset-moment identity broke at d={d} rho={rho}: deviation {dev}"
            );
        }
    }
    pass(1, "parity subset moments");
}

#[test]
fn acceptance_02_collection_moment_agreement() {
    for d in 2..=6usize {
        let subsets = subsets_up_to(d, d);
        let u = SubsetCollection::new(d, subsets).expect("subset collection");
        let family = build_parity_family(&u, 0.5, d).expect("parity family");
        let (fast_dev, indicator_dev) =
            collection_agreement_max_dev(&family, 4).expect("collection scan");
        assert!(
            fast_dev <= 1e-12,
            "fast vs brute collection moments disagree at d={d}: {fast_dev}"
        );
        assert!(
            indicator_dev <= 1e-12,
            "collection moment is not the closedness indicator at d={d}: {indicator_dev}"
        );
    }
    pass(2, "collection moment agreement");
}

#[test]
fn acceptance_03_closed_collection_counts() {
    let (excess, odd_max) = closed_collection_grid(6, 3, 4).expect("count grid");
    assert!(
        excess <= 0.0,
        "a closed-collection count exceeded its bound by {excess}"
    );
    assert_eq!(odd_max, 0, "nonzero closed-collection count at odd l*r");
    pass(3, "closed collection counts");
}

#[test]
fn acceptance_04_cd_reduction_fidelity() {
    for trial in 0..50u64 {
        let size = 3 + (trial as usize % 6);
        let k = 2 + (trial as usize % 3);
        let family = random_centered_family(4000 + trial, size, k, 0.2).expect("random family");
        let red = reduce_cd_to_bcd(&family).expect("reduction");
        let mut eta_dev = 0.0f64;
        for i in 0..k {
            let back = compose(&red.back, red.bcd.alternative(i)).expect("pushback");
            for idx in 0..family.base().len() {
                eta_dev = eta_dev.max((back.prob(idx) - family.alternative(i).prob(idx)).abs());
            }
        }
        assert!(
            eta_dev <= 1e-10,
            "trial {trial}: reduction fails to reproduce an alternative, deviation {eta_dev}"
        );
        let moment_dev = moment_preservation_max_dev(&family, &red.bcd, 3).expect("moment scan");
        assert!(
            moment_dev <= 1e-10,
            "trial {trial}: centered moments drift through the reduction by {moment_dev}"
        );
    }
    pass(4, "cd reduction fidelity");
}

#[test]
fn acceptance_05_alpha_fixed_point() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(55);
    for trial in 0..1000usize {
        let k = rng.gen_range(2..=300usize);
        let n = rng.gen_range(1..=5000usize);
        let frac: f64 = rng.gen_range(1e-3..1.0);
        let rho = frac * rho_gate(k, n);
        let sol = solve_alpha(k, n, rho).expect("alpha solve");
        assert!(
            sol.residual() <= 1e-9,
            "trial {trial}: bisection residual {} at k={k} n={n} rho={rho}",
            sol.residual()
        );
        let (lower, upper) = sol.bounds();
        assert!(
            sol.alpha + 1e-9 >= lower && sol.alpha <= upper + 1e-9,
            "trial {trial}: alpha {} escapes [{lower}, {upper}]",
            sol.alpha
        );
        assert!(
            sol.alpha > 0.0 && sol.alpha <= 0.5,
            "trial {trial}: alpha {} outside (0, 1/2]",
            sol.alpha
        );
    }
    let anchor = solve_alpha(10, 100, 0.001).expect("anchor solve");
    assert!(
        (anchor.alpha - 0.11754511304721471).abs() <= 1e-12,
        "anchor alpha drifted to {}",
        anchor.alpha
    );
    pass(5, "alpha fixed point");
}

#[test]
fn acceptance_06_chain_bias_identities() {
    for &(d, n) in &[(2usize, 1usize), (2, 2), (3, 1), (3, 2)] {
        let u = SubsetCollection::singletons(d).expect("singletons");
        for &frac in &[0.25, 0.75] {
            let rho = frac * rho_gate(d, n);
            let family = build_parity_family(&u, rho, d).expect("parity family");
            let chain = build_chain(&family, n).expect("chain");
            let report = verify_bias(&chain);
            assert!(
                report.item3_max_dev <= 1e-12,
                "d={d} n={n} frac={frac}: good-set slice identity off by {}",
                report.item3_max_dev
            );
            assert!(
                report.item4_max_dev <= report.item4_bound + 1e-12,
                "d={d} n={n} frac={frac}: Z bias {} above bound {}",
                report.item4_max_dev,
                report.item4_bound
            );
            assert!(
                report.item5_identity_dev <= 1e-12,
                "d={d} n={n} frac={frac}: Y-Z transfer identity off by {}",
                report.item5_identity_dev
            );
            assert!(
                report.escape_max <= report.item4_bound + 1e-12,
                "d={d} n={n} frac={frac}: escape mass {} above bound {}",
                report.escape_max,
                report.item4_bound
            );
            assert!(
                report.passes(1e-12),
                "d={d} n={n} frac={frac}: bias report fails: {report:?}"
            );
        }
    }
    pass(6, "chain bias identities");
}

#[test]
fn acceptance_07_divergence_margin_sweep() {
    let cfg = MarginSuiteConfig {
        instances: 1000,
        seed: 0,
        tol: 1e-12,
    };
    let report = margin_suite(&cfg).expect("margin suite");
    for check in &report.checks {
        assert_eq!(
            check.status,
            CheckStatus::Pass,
            "margin check {} failed: measured {} bound {}",
            check.id,
            check.measured,
            check.bound
        );
    }
    assert_eq!(report.checks.len(), 11, "unexpected margin check count");
    pass(7, "divergence margin sweep");
}

#[test]
fn acceptance_08_sdpi_closed_point() {
    let bit = SpaceKind::Binary { d: 1 };
    let uniform = Pmf::uniform(bit);
    let chain = joint(&uniform, &Channel::identity(bit)).expect("identity joint");
    let info = mutual_info(&chain);
    let margin = sdpi_margin(&chain, 0.5).expect("sdpi margin");
    let eroded = 0.25 * info - margin;
    let h34 = -(0.75f64.log2() * 0.75 + 0.25f64.log2() * 0.25);
    let target = 1.0 - h34;
    assert!(
        (eroded - target).abs() <= 1e-6,
        "eroded information {eroded} misses the closed form {target}"
    );
    assert!(
        eroded <= 0.25 + 1e-12,
        "eroded information {eroded} exceeds the contraction bound"
    );
    pass(8, "sdpi closed point");
}

#[test]
fn acceptance_09_gaussian_moment_identities() {
    for &d in &[2usize, 4, 8] {
        for &sigma in &[0.1, 0.5, 0.9] {
            let cov = PlantedCovariance::new((0, d - 1), sigma, d).expect("planted covariance");
            let det_dev = (cov.matrix().determinant() - planted_det(sigma)).abs();
            assert!(
                det_dev <= 1e-12,
                "planted determinant off by {det_dev} at d={d} sigma={sigma}"
            );
        }
    }

    let sigma = 0.004f64;
    for pairs in [[(0usize, 1usize), (2, 3)], [(0, 1), (1, 2)]] {
        let moment = high_order_closed(&pairs, sigma, 4).expect("closed moment");
        assert!(
            (moment - 1.0).abs() <= 1e-12,
            "distinct-pair moment {moment} is not 1 for {pairs:?}"
        );
    }
    for &s in &[0.1, 0.3, 0.5] {
        let same = high_order_closed(&[(0, 1), (0, 1)], s, 3).expect("same-pair moment");
        let expect = 1.0 / (1.0 - s * s);
        assert!(
            (same - expect).abs() <= 1e-10,
            "same-pair second moment {same} misses {expect} at sigma={s}"
        );
    }

    let mut vanishing_checked = 0usize;
    for d in 2..=8usize {
        let mut all_pairs = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                all_pairs.push((i, j));
            }
        }
        for r in 1..=4usize.min(all_pairs.len()) {
            for combo in index_combinations(all_pairs.len(), r) {
                let stack: Vec<(usize, usize)> = combo.iter().map(|&i| all_pairs[i]).collect();
                if !has_unique_coordinate(&stack) {
                    continue;
                }
                let centered =
                    centered_high_order_closed(&stack, sigma, d).expect("centered moment");
                assert!(
                    centered.abs() <= 1e-10,
                    "centered moment {centered} survives for {stack:?} at d={d}"
                );
                vanishing_checked += 1;
            }
        }
    }
    assert!(
        vanishing_checked > 20_000,
        "vanishing-moment sweep too small: {vanishing_checked} stacks"
    );

    let near_gate = 0.999 * stack_sigma_gate();
    for r in 2..=5usize {
        let chain: Vec<(usize, usize)> = (0..r).map(|i| (i, i + 1)).collect();
        let stack = stack_build(&chain, near_gate, r + 1).expect("stack under gate");
        assert!(
            stack.det() <= 2.0 + 1e-12,
            "stack determinant {} above 2 at r={r}",
            stack.det()
        );
        let max_entry = stack
            .matrix()
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        assert!(
            max_entry <= 2.0 + 1e-12,
            "stack entry {max_entry} above 2 at r={r}"
        );
    }
    pass(9, "gaussian moment identities");
}

#[test]
fn acceptance_10_monte_carlo_agreement() {
    let cfg = GaussianMcConfig {
        samples: 1_000_000,
        stacks: 20,
        seed: 0,
    };
    let report = gaussian_mc_suite(&cfg).expect("mc suite");
    for check in &report.checks {
        assert_eq!(
            check.status,
            CheckStatus::Pass,
            "monte carlo check {} failed: measured {} bound {}",
            check.id,
            check.measured,
            check.bound
        );
    }
    let ids: Vec<&str> = report.checks.iter().map(|c| c.id.as_str()).collect();
    assert!(ids.contains(&"mc-closed-agreement"), "missing mc agreement check");
    assert!(ids.contains(&"box-escape-frequency"), "missing escape check");
    assert!(ids.contains(&"truncated-ratio-sampled"), "missing ratio check");
    pass(10, "monte carlo agreement");
}

#[test]
fn acceptance_11_streaming_budget_tradeoff() {
    let hypotheses = SubsetCollection::all_pairs(16).expect("pair hypotheses");
    let family = build_parity_family(&hypotheses, 0.25, 16).expect("pair family");
    let cfg = GroupScanConfig::new(hypotheses, 0.25, 0.1).expect("scan config");
    let k = cfg.k();
    assert_eq!(k, 120, "pair count at d=16");
    let t0 = cfg.phase_len();
    assert_eq!(
        required_samples(&cfg, k).expect("full-memory samples"),
        t0,
        "full memory needs exactly one phase"
    );

    let full_bits = cfg.phase_bits() + k * cfg.slot_bits();
    let full = build_group_scan(&cfg, full_bits).expect("full-memory scanner");
    assert_eq!(full.slots(), k);
    let mut hits = 0usize;
    for trial in 0..200usize {
        let planted = trial % k;
        let seed = 9000 + trial as u64;
        let (out, audit) =
            run_stream(&full, family.alternative(planted), seed, t0, 1).expect("stream run");
        assert_eq!(audit.max_state_bits, full_bits, "state width drifted");
        if out == Some(planted) {
            hits += 1;
        }
    }
    assert!(
        hits >= 180,
        "full-memory detector succeeded only {hits}/200 times at t = t0"
    );

    let quarter_bits = cfg.phase_bits() + (k / 4) * cfg.slot_bits();
    let quarter = build_group_scan(&cfg, quarter_bits).expect("quarter scanner");
    assert_eq!(quarter.slots(), k / 4);
    let t_quarter = required_samples(&cfg, k / 4).expect("quarter samples");
    assert_eq!(t_quarter, 4 * t0, "quarter memory needs four phases");
    let mut quarter_hits = 0usize;
    for trial in 0..200usize {
        let planted = trial % k;
        let seed = 17_000 + trial as u64;
        let (out, _) = run_stream(&quarter, family.alternative(planted), seed, t_quarter, 1)
            .expect("stream run");
        if out == Some(planted) {
            quarter_hits += 1;
        }
    }
    assert!(
        quarter_hits >= 180,
        "quarter-memory detector succeeded only {quarter_hits}/200 times at t = 4 t0"
    );

    let budgets: Vec<usize> = [1usize, 10, 30, 60, 120]
        .iter()
        .map(|slots| cfg.phase_bits() + slots * cfg.slot_bits())
        .collect();
    let records =
        sweep_tradeoff(&cfg, &budgets, &[1], &family, 20, 31_000).expect("tradeoff sweep");
    assert_eq!(records.len(), budgets.len());
    let mut prev_t = usize::MAX;
    let mut ts_min = u128::MAX;
    let mut ts_max = 0u128;
    for rec in &records {
        assert_eq!(
            rec.status,
            SweepStatus::Ok,
            "sweep point at {} bits did not reach the target",
            rec.s_bits
        );
        assert!(
            rec.t <= prev_t,
            "minimal t increased from {prev_t} to {} as memory grew",
            rec.t
        );
        prev_t = rec.t;
        ts_min = ts_min.min(rec.ts_ell);
        ts_max = ts_max.max(rec.ts_ell);
    }
    assert!(
        ts_max <= 2 * ts_min,
        "t*s*l spread [{ts_min}, {ts_max}] exceeds a factor-2 band"
    );
    pass(11, "streaming budget tradeoff");
}

#[test]
fn acceptance_12_broadcast_exact_bits() {
    let hypotheses = SubsetCollection::all_pairs(4).expect("pair hypotheses");
    let family = build_parity_family(&hypotheses, 0.3, 4).expect("pair family");
    let k = hypotheses.len();
    let gb = build_group_broadcast(hypotheses, 0.3, 0.1, 6, 488, 10).expect("broadcast build");
    assert_eq!(gb.phase_len(), 488, "per-group sample requirement");
    assert_eq!(gb.sum_bits(), 10);
    assert_eq!(gb.groups(), 6);
    assert_eq!(gb.total_bits(), 60, "closed-form communication bound");

    let mut hits = 0usize;
    for trial in 0..200usize {
        let planted = trial % k;
        let inputs: Vec<Vec<usize>> = (0..6)
            .map(|machine| {
                let seed = 40_000 + trial as u64 * 64 + machine as u64;
                draw_samples(family.alternative(planted), seed, 488)
            })
            .collect();
        let (out, transcript) = run_protocol(&gb, &inputs, 0).expect("protocol run");
        assert_eq!(
            transcript.bit_count(),
            60,
            "trial {trial}: transcript used {} bits",
            transcript.bit_count()
        );
        if out == Some(planted) {
            hits += 1;
        }
    }
    assert!(
        hits >= 180,
        "group broadcast succeeded only {hits}/200 times"
    );
    pass(12, "broadcast exact bits");
}

#[test]
fn acceptance_13_stream_protocol_equivalence() {
    let hypotheses = SubsetCollection::singletons(3).expect("singleton hypotheses");
    let family = build_parity_family(&hypotheses, 0.3, 3).expect("singleton family");
    let cfg = GroupScanConfig::new(hypotheses, 0.3, 0.2).expect("scan config");

    let mut trials_run = 0usize;
    for &slots in &[1usize, 2, 3] {
        let s = cfg.phase_bits() + slots * cfg.slot_bits();
        for &passes in &[1usize, 2] {
            for &(m, n) in &[(4usize, 300usize), (2, 600)] {
                let alg = build_group_scan(&cfg, s)
                    .expect("scanner")
                    .with_passes(passes);
                let t = required_samples_per_pass(&cfg, slots, passes).expect("per-pass samples");
                let sp = stream_to_protocol(alg.clone(), t, m, n).expect("stream protocol");
                let handoff_bound = t.div_ceil(n) * passes * s + passes * s;
                for rep in 0..9usize {
                    let planted = rep % 3;
                    let seed = 60_000 + trials_run as u64;
                    let sampler = family.alternative(planted);
                    let (direct_out, _) =
                        run_stream(&alg, sampler, seed, t, passes).expect("direct run");

                    let pool = draw_samples(sampler, seed, m * n);
                    let samples = &pool[..t];
                    let mut state = alg.init();
                    for pass in 0..passes {
                        for (i, &x) in samples.iter().enumerate() {
                            state = alg.update(x, &state, pass as u64 * t as u64 + i as u64);
                        }
                    }

                    let inputs: Vec<Vec<usize>> =
                        (0..m).map(|p| pool[p * n..(p + 1) * n].to_vec()).collect();
                    let (proto_out, transcript) =
                        run_protocol(&sp, &inputs, seed).expect("protocol run");
                    assert_eq!(
                        proto_out, direct_out,
                        "outputs diverge at slots={slots} passes={passes} m={m} n={n} rep={rep}"
                    );
                    let (_, last_state) = transcript.messages().last().expect("nonempty transcript");
                    assert_eq!(
                        last_state.to_bytes(),
                        state.to_bytes(),
                        "final states diverge at slots={slots} passes={passes} m={m} n={n} rep={rep}"
                    );
                    assert!(
                        transcript.bit_count() <= handoff_bound,
                        "handoff used {} bits, bound {handoff_bound}",
                        transcript.bit_count()
                    );
                    trials_run += 1;
                }
            }
        }
    }
    assert!(trials_run >= 100, "only {trials_run} equivalence trials ran");
    pass(13, "stream protocol equivalence");
}

#[test]
fn acceptance_14_transcript_separation() {
    let instances: Vec<(SubsetCollection, usize, usize, usize)> = vec![
        (SubsetCollection::singletons(2).expect("singletons"), 2, 2, 2),
        (SubsetCollection::singletons(2).expect("singletons"), 2, 1, 3),
        (SubsetCollection::all_pairs(3).expect("pairs"), 3, 2, 2),
    ];
    for (hypotheses, d, m, n) in instances {
        let family = build_parity_family(&hypotheses, 0.9, d).expect("parity family");
        let proto = ExhaustiveBroadcast::new(hypotheses, m, n).expect("exhaustive protocol");
        let dists = transcript_distributions(&proto, &family, 1_000_000).expect("distributions");
        let epsilon = dists.measured_error();
        assert!(
            epsilon < 0.5,
            "instance d={d} m={m} n={n} identifies too poorly: epsilon {epsilon}"
        );
        let report =
            tv_separation_check(&proto, &family, epsilon, 1_000_000).expect("separation check");
        assert!(
            report.min_pairwise_tv >= report.tv_bound - 1e-12,
            "pairwise transcript TV {} below 1 - 2 eps = {}",
            report.min_pairwise_tv,
            report.tv_bound
        );
        assert!(
            report.hellinger_sum >= report.hellinger_bound - 1e-12,
            "hellinger sum {} below its bound {}",
            report.hellinger_sum,
            report.hellinger_bound
        );
        assert!(report.passes(), "separation report failed: {report:?}");
    }
    pass(14, "transcript separation");
}

#[test]
fn acceptance_15_correlation_partial_sum() {
    let u = SubsetCollection::all_pairs(4).expect("pair hypotheses");
    let family = build_parity_family(&u, 0.1, 4).expect("pair family");
    let pair_terms = correlation_condition_lhs(&family, 100, 2).expect("order-2 sum");
    assert_eq!(pair_terms, 0.0, "order-2 terms must vanish exactly");
    let partial = correlation_condition_lhs(&family, 100, 3).expect("order-3 sum");
    let target = 4.0 * 100f64.powf(-1.5);
    assert!(
        (partial - target).abs() <= 1e-12,
        "partial sum {partial} misses the closed form {target}"
    );
    pass(15, "correlation partial sum");
}
