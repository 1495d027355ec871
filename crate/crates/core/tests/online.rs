use proptest::prelude::*;
use uclab::classes::ClassSchedule;
use uclab::exec::Exec;
use uclab::learners::{sual_predict, LearnerConfig, RuleKind, ScheduleParams};
use uclab::online::*;
use uclab::processes::{make_process, ProcessSpec};
use uclab::rng::StreamRng;
use uclab::spaces::{InstanceSpace, LossKind, LossSpace, Point, Value, ValueSpace};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn regret_inequality_holds_per_instance(seed in any::<u64>(), b in 0.05f64..0.95, experts in 1usize..20, n in 1usize..150) {
        let mut rng = StreamRng::new(seed);
        let mut state = AggregatorState::new(b, experts).unwrap();
        let mut mixed = 0.0;
        for _ in 0..n {
            let v = aggregate_weights(&state).unwrap();
            let total: f64 = v.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            let z: Vec<f64> = (0..experts).map(|_| rng.uniform()).collect();
            mixed += v.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
            state.update(&z).unwrap();
        }
        prop_assert!(mixed / n as f64 <= state.best_bound() + 1e-9);
    }

    #[test]
    fn deterministic_predictor_step_bound(seed in any::<u64>(), k in 2u32..5, experts in 1usize..10) {
        let loss = LossSpace::new(ValueSpace::Labels { k }, LossKind::ZeroOne);
        let bank: Vec<Box<dyn OnlineRule>> = (0..experts)
            .map(|i| Box::new(OnlineMemorize::new((i as u32 % k) as f64)) as Box<dyn OnlineRule>)
            .collect();
        let mut agg = Aggregate::new(0.5, bank, loss, 0.0).unwrap();
        let mut rng = StreamRng::new(seed);
        for t in 0..200u64 {
            let x = Point::Nat(rng.below(12));
            agg.predict(&x).unwrap();
            let y = rng.below(k as u64) as f64;
            agg.feed(y).unwrap();
            let step = agg.last_step().unwrap();
            prop_assert!(step.loss <= 2.0 * loss.sup_loss() * step.mixed_loss + 1e-12, "step {}", t);
        }
    }
}

#[test]
fn regret_bound_example() {
    assert!((regret_bound(0.5, 0.5, 0.0, 1) - 1.386294).abs() < 1e-6);
}

#[test]
fn memorization_mistakes_equal_first_occurrences() {
    for (spec, seed) in [
        (ProcessSpec::IidNat { support: 30 }, 1),
        (ProcessSpec::LogGrowth, 0),
        (ProcessSpec::Markov { states: 7, stay: 0.5 }, 2),
        (ProcessSpec::BernoulliBlock, 3),
    ] {
        let mut s = make_process(&spec, seed).unwrap();
        let mut rule = OnlineMemorize::new(0.0);
        let mut seen = std::collections::HashSet::new();
        let mut mistakes = 0;
        let mut fresh = 0;
        for _ in 0..5000 {
            let x = s.next_point();
            fresh += seen.insert(x.key()) as u32;
            let y = 1.0 + (x.as_nat().unwrap() % 3) as f64;
            mistakes += (rule.predict(&x).unwrap() != y) as u32;
            rule.feed(y).unwrap();
        }
        assert_eq!(mistakes, fresh, "{spec:?}");
    }
}

#[test]
fn wrapper_index_zero_is_rejected() {
    let cfg = LearnerConfig::new(RuleKind::SelfAdaptive);
    let model = cfg
        .adaptive_model(InstanceSpace::Unit, &LossSpace::binary_zero_one(), 4, Exec::Sequential)
        .unwrap();
    assert!(matches!(
        ExpertWrapper::new(0, 0.0, model),
        Err(uclab::LabError::Config { .. })
    ));
}

#[test]
fn wrapper_agrees_with_direct_rule() {
    let loss = LossSpace::binary_zero_one();
    let classes = ClassSchedule::with_defaults(InstanceSpace::Unit, ValueSpace::Binary);
    let params = ScheduleParams::default();
    let cfg = LearnerConfig::new(RuleKind::SelfAdaptive);
    let model = cfg.adaptive_model(InstanceSpace::Unit, &loss, 12, Exec::Sequential).unwrap();
    let xs = make_process(&ProcessSpec::IidUniform, 21).unwrap().take(60);
    let ys: Vec<Value> = xs.iter().map(|x| (x.as_real().unwrap() > 0.6) as u8 as f64).collect();
    for i in [1, 3, 12] {
        let mut w = ExpertWrapper::new(i, 0.0, model.clone()).unwrap();
        for (n, (x, &y)) in xs.iter().zip(&ys).enumerate() {
            let got = w.predict(x).unwrap();
            let want = if n < i {
                0.0
            } else {
                sual_predict(&xs, &ys, i, n, x, &params, &classes, &loss).unwrap()
            };
            assert_eq!(got.to_bits(), want.to_bits(), "i={i} n={n}");
            w.feed(y).unwrap();
        }
    }
}

#[test]
fn wrapper_bank_aggregate_learns_a_simple_target() {
    let loss = LossSpace::binary_zero_one();
    let cfg = OnlineConfig {
        i_max: 8,
        ..OnlineConfig::new(OnlineRuleKind::Aggregate)
    };
    let mut rule = cfg.build(InstanceSpace::Unit, &loss, None, Exec::Sequential).unwrap();
    let mut s = make_process(&ProcessSpec::IidUniform, 4).unwrap();
    let mut late = 0;
    for t in 0..600 {
        let x = s.next_point();
        let y = (x.as_real().unwrap() >= 0.5) as u8 as f64;
        let p = rule.predict(&x).unwrap();
        if t >= 300 {
            late += (p != y) as u32;
        }
        rule.feed(y).unwrap();
    }
    assert!(late <= 15, "{late} late mistakes");
}
