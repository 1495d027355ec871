use uclab::diagnostics::*;
use uclab::exec::Exec;
use uclab::processes::{make_process, ProcessSpec};
use uclab::spaces::{InstanceSpace, MeasurableSet, Point};

fn sample(spec: ProcessSpec, seed: u64, len: usize) -> Vec<Point> {
    make_process(&spec, seed).unwrap().take(len)
}

fn constant() -> ProcessSpec {
    ProcessSpec::Constant {
        space: InstanceSpace::Nat,
        value: 3.0,
    }
}

#[test]
fn condition1_constant_process_is_flat_zero() {
    let xs = sample(constant(), 0, 200);
    let fam: SetFamily = "{3};~{3}".parse().unwrap();
    let curve = condition1_curve(&xs, &fam, &[1, 10, 100, 200]).unwrap();
    assert!(curve.iter().all(|&(_, v)| v == 0.0));
}

#[test]
fn condition1_fresh_points_stay_near_one() {
    let xs = sample(ProcessSpec::FreshPoint, 0, 10_000);
    let curve = condition1_curve(&xs, &SetFamily::Singletons, &[1, 10, 100]).unwrap();
    for (n, v) in curve {
        assert_eq!(v, (10_000 - n) as f64 / 10_000.0);
        assert!(v >= 0.99);
    }
}

#[test]
fn condition1_log_growth_keeps_half_the_mass_unvisited() {
    let horizon = (1usize << 16) - 1;
    let xs = sample(ProcessSpec::LogGrowth, 0, horizon);
    let checkpoints: Vec<usize> = (8..16).map(|j| (1usize << j) - 1).collect();
    let curve = condition1_curve(&xs, &SetFamily::Singletons, &checkpoints).unwrap();
    for &(n, v) in &curve {
        assert!(v >= 0.5, "n={n} v={v}");
    }
    assert!(curve.windows(2).all(|w| w[1].1 <= w[0].1));
}

#[test]
fn condition1_curve_is_nonincreasing() {
    for seed in 0..5 {
        let xs = sample(ProcessSpec::IidNat { support: 50 }, seed, 3000);
        let cps: Vec<usize> = (1..=30).map(|k| k * 100).collect();
        let curve = condition1_curve(&xs, &SetFamily::Singletons, &cps).unwrap();
        assert!(curve.windows(2).all(|w| w[1].1 <= w[0].1));
    }
}

#[test]
fn condition2_examples() {
    let t = (1usize << 20) - 1;
    let xs = sample(ProcessSpec::LogGrowth, 0, t);
    let c = condition2_curve(&xs, &SetFamily::Singletons, &[t]).unwrap();
    assert_eq!(c[0].1, 20.0 / t as f64);
    assert!((c[0].1 - 1.907e-5).abs() < 1e-8);

    let xs = sample(ProcessSpec::FreshPoint, 0, 5000);
    let c = condition2_curve(&xs, &SetFamily::Singletons, &[1, 10, 5000]).unwrap();
    assert!(c.iter().all(|&(_, v)| v == 1.0));

    let xs = sample(constant(), 0, 400);
    let c = condition2_curve(&xs, &SetFamily::Singletons, &[1, 8, 400]).unwrap();
    assert!(c.iter().all(|&(n, v)| v == 1.0 / n as f64));
}

#[test]
fn condition2_replays_exactly() {
    let spec = DiagnosticSpec {
        condition: Condition::C2,
        process: ProcessSpec::BernoulliBlock,
        sets: SetFamily::Singletons,
        checkpoints: vec![100, 1000, 10_000],
        seeds: vec![3, 1, 2],
        horizon: None,
    };
    let a = run_diagnostic(&spec, Exec::Parallel).unwrap();
    let b = run_diagnostic(&spec, Exec::Sequential).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records.iter().map(|r| r.seed).collect::<Vec<_>>(), [1, 1, 1, 2, 2, 2, 3, 3, 3]);
    assert!(a.records.iter().all(|r| r.caveat == CAVEAT));
    assert!(a.means.iter().all(|m| m.caveat == CAVEAT));
}

#[test]
fn condition3_examples() {
    let finite = sample(ProcessSpec::IidNat { support: 5 }, 1, 4000);
    let tails = SetFamily::Tails { count: 100 };
    let counts: Vec<u64> = [100, 1000, 4000]
        .iter()
        .map(|&n| condition3_count(&finite[..n], &tails).unwrap())
        .collect();
    assert!(counts.iter().all(|&c| c == 4));

    let fresh = sample(ProcessSpec::FreshPoint, 0, 500);
    for n in [10, 100, 500] {
        assert_eq!(condition3_count(&fresh[..n], &SetFamily::Tails { count: 1000 }).unwrap(), n as u64);
    }
}

#[test]
fn condition3_uniform_dyadic_heads_grow_like_log2() {
    let heads = SetFamily::DyadicHeads { count: 60 };
    let ts = [1usize << 8, 1 << 11, 1 << 14, 1 << 17];
    let mut means = Vec::new();
    for &t in &ts {
        let total: u64 = (0..20)
            .map(|seed| condition3_count(&sample(ProcessSpec::IidUniform, seed, t), &heads).unwrap())
            .sum();
        means.push(total as f64 / 20.0);
    }
    let lx: Vec<f64> = ts.iter().map(|&t| (t as f64).log2()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / 4.0, means.iter().sum::<f64>() / 4.0);
    let slope = lx.iter().zip(&means).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    assert!((slope - 1.0).abs() < 0.25, "slope {slope}, means {means:?}");
}

#[test]
fn crf_examples() {
    let half: MeasurableSet = "[0,1/2)".parse().unwrap();
    let cps: Vec<usize> = (1..=10).map(|k| k * 10_000).collect();
    for seed in 0..5 {
        let xs = sample(ProcessSpec::IidUniform, seed, 100_000);
        let (lo, hi) = crf_probe(&xs, &half, &cps).unwrap();
        assert!(hi - lo <= 0.05);
    }

    let spec = ProcessSpec::DoublingBlock {
        space: InstanceSpace::Nat,
        x0: 0.0,
        x1: 1.0,
    };
    let xs = sample(spec, 0, 3usize.pow(9));
    let one: MeasurableSet = "{1}".parse().unwrap();
    let cps: Vec<usize> = (1..=9).map(|i| 3usize.pow(i) - 1).collect();
    let (lo, hi) = crf_probe(&xs, &one, &cps).unwrap();
    assert!(hi >= 2.0 / 3.0 && lo <= 1.0 / 3.0);

    let xs = sample(constant(), 0, 50);
    let (lo, hi) = crf_probe(&xs, &"{3}".parse().unwrap(), &[1, 25, 50]).unwrap();
    assert_eq!((lo, hi), (1.0, 1.0));
}
