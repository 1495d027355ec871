use std::collections::HashSet;

use proptest::prelude::*;
use uclab::processes::{kappa_bit, make_process, nn_killer_boundaries, nn_killer_on_grid, ProcessSpec, TargetFunction, TargetSpec};
use uclab::spaces::Point;

#[test]
fn nn_killer_deterministic_indices_are_sparse() {
    let xs = make_process(&ProcessSpec::NnKiller, 3).unwrap().take(3630);
    let on_grid = xs
        .iter()
        .filter(|x| {
            let v = x.as_real().unwrap();
            v == 0.0 || nn_killer_on_grid(v, 4)
        })
        .count();
    let m = 3630.0f64;
    assert!(on_grid as f64 <= 1.0 + (m / 3.0).sqrt() + m / 3.0);
    assert!(on_grid <= 1212, "{on_grid}");
    // random draws land strictly inside (0, 1/2) shifted by the block parity
    assert!(xs.iter().all(|x| (0.0..=1.0).contains(&x.as_real().unwrap())));
}

#[test]
fn nn_killer_boundaries_increase() {
    let b = nn_killer_boundaries(5);
    assert_eq!(b, vec![1, 3, 30, 3630, 65_888_130]);
}

#[test]
fn nn_killer_target_on_second_point() {
    let xs = make_process(&ProcessSpec::NnKiller, 0).unwrap().take(2);
    assert_eq!(xs, vec![Point::Real(0.0), Point::Real(0.5)]);
    let t = TargetFunction::from_spec(&TargetSpec::NnKiller { y0: 0.0, y1: 1.0 }).unwrap();
    assert_eq!(t.eval(&xs[1]).unwrap(), 0.0);
}

#[test]
fn replay_is_bit_exact() {
    for spec in ProcessSpec::catalog() {
        let mut a = make_process(&spec, 99).unwrap();
        let mut b = make_process(&spec, 99).unwrap();
        let first = a.take(100_000);
        assert_eq!(first, b.take(100_000), "{}", spec.name());
        let mut fork = a.clone();
        assert_eq!(a.take(1000), fork.take(1000), "{}", spec.name());
    }
}

#[test]
fn neighbouring_seeds_differ() {
    let a = make_process(&ProcessSpec::IidUniform, 5).unwrap().take(100);
    let b = make_process(&ProcessSpec::IidUniform, 6).unwrap().take(100);
    assert_ne!(a, b);
}

#[test]
fn doubling_block_frequency_swings() {
    let spec = ProcessSpec::DoublingBlock {
        space: uclab::spaces::InstanceSpace::Nat,
        x0: 0.0,
        x1: 1.0,
    };
    let xs = make_process(&spec, 0).unwrap().take(19_682);
    for i in 1..=9u32 {
        let m = 3usize.pow(i) - 1;
        let hits = xs[..m].iter().filter(|x| **x == Point::Nat(1)).count();
        if i % 2 == 1 {
            assert!(3 * hits >= 2 * m, "i={i}");
        } else {
            assert!(3 * hits <= m, "i={i}");
        }
    }
}

fn distinct(xs: &[Point]) -> usize {
    xs.iter().map(|x| x.key()).collect::<HashSet<_>>().len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn log_growth_distinct_count(t in 1usize..50_000) {
        let xs = make_process(&ProcessSpec::LogGrowth, 0).unwrap().take(t);
        // floor(log2(2t)) by bit length
        let oracle = (usize::BITS - (2 * t).leading_zeros() - 1) as usize;
        prop_assert_eq!(distinct(&xs), oracle);
    }

    #[test]
    fn fresh_points_never_repeat(t in 1usize..20_000, seed in any::<u64>()) {
        let xs = make_process(&ProcessSpec::FreshPoint, seed).unwrap().take(t);
        prop_assert_eq!(distinct(&xs), t);
    }

    #[test]
    fn dyadic_kappa_bits_terminate(level in 1u32..20, j in any::<u32>(), i in 1u32..40) {
        let num = j as u64 % (1u64 << level);
        let kappa = num as f64 / (1u64 << level) as f64;
        let bit = kappa_bit(kappa, i).unwrap();
        let oracle = if i <= level { ((num >> (level - i)) & 1) as u8 } else { 0 };
        prop_assert_eq!(bit, oracle);
    }

    #[test]
    fn constant_process_repeats(v in 0u64..1000) {
        let spec = ProcessSpec::Constant { space: uclab::spaces::InstanceSpace::Nat, value: v as f64 };
        let xs = make_process(&spec, 1).unwrap().take(500);
        prop_assert!(xs.iter().all(|x| *x == Point::Nat(v)));
    }
}
