//! Randomized invariants over the public API.

use proptest::prelude::*;

use corrdet::finite_dist::{Pmf, SpaceKind};
use corrdet::gaussian::{stack_build, stack_sigma_gate};
use corrdet::lowerbound_chain::{rho_gate, solve_alpha};
use corrdet::streaming::{draw_samples, BitState};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn alpha_stays_in_its_enclosure(
        k in 2..=300usize,
        n in 1..=5000usize,
        frac in 1e-3..1.0f64,
    ) {
        let rho = frac * rho_gate(k, n);
        let sol = solve_alpha(k, n, rho).unwrap();
        prop_assert!(sol.residual() <= 1e-9, "residual {}", sol.residual());
        let (lower, upper) = sol.bounds();
        prop_assert!(
            sol.alpha + 1e-9 >= lower && sol.alpha <= upper + 1e-9,
            "alpha {} outside [{lower}, {upper}]",
            sol.alpha
        );
        prop_assert!(sol.alpha > 0.0 && sol.alpha <= 0.5);
    }

    #[test]
    fn bit_state_fields_round_trip(
        len in 1..=256usize,
        raw_offset in 0..256usize,
        raw_width in 1..=64usize,
        value: u64,
        background: u64,
    ) {
        let width = raw_width.min(len);
        let offset = raw_offset % (len - width + 1);
        let mut state = BitState::zeros(len);
        for i in 0..len {
            state.set_bit(i, background >> (i % 64) & 1 == 1);
        }
        let before: Vec<bool> = (0..len).map(|i| state.get_bit(i)).collect();
        let masked = if width == 64 { value } else { value & ((1u64 << width) - 1) };
        state.set_field(offset, width, masked);
        prop_assert_eq!(state.get_field(offset, width), masked);
        for i in 0..len {
            if i < offset || i >= offset + width {
                prop_assert_eq!(state.get_bit(i), before[i], "bit {} disturbed", i);
            }
        }
        let bytes = state.to_bytes();
        let rebuilt = BitState::from_bytes(len, &bytes).unwrap();
        prop_assert_eq!(rebuilt.get_field(offset, width), masked);
    }

    #[test]
    fn sample_draws_extend_as_prefixes(
        seed: u64,
        short in 1..=200usize,
        extra in 0..=200usize,
        weights in prop::collection::vec(0.05..1.0f64, 2..=9),
    ) {
        let total: f64 = weights.iter().sum();
        let mass: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let pmf = Pmf::new(SpaceKind::Abstract { size: mass.len() }, mass).unwrap();
        let a = draw_samples(&pmf, seed, short);
        let b = draw_samples(&pmf, seed, short + extra);
        prop_assert_eq!(&b[..short], &a[..]);
        prop_assert!(b.iter().all(|&x| x < pmf.len()));
    }

    #[test]
    fn gated_stacks_keep_bounded_envelopes(
        r in 2..=5usize,
        frac in 0.01..=1.0f64,
    ) {
        let sigma = frac * 0.999 * stack_sigma_gate();
        let chain: Vec<(usize, usize)> = (0..r).map(|i| (i, i + 1)).collect();
        let stack = stack_build(&chain, sigma, r + 1).unwrap();
        prop_assert!(stack.det() <= 2.0 + 1e-12, "det {}", stack.det());
        prop_assert!(stack.det() > 0.0);
        let worst = stack.matrix().iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        prop_assert!(worst <= 2.0 + 1e-12, "entry {}", worst);
    }
}
