use std::sync::{Arc, Mutex};

use uclab::exec::Exec;
use uclab::harness::{
    parse_config, run_experiment, run_with, trace_csv, write_trace, ExperimentConfig, ExperimentTrace, Learner,
    Protocol, CSV_HEADER,
};
use uclab::learners::{InductiveRule, SelfAdaptiveRule};
use uclab::processes::make_process;
use uclab::spaces::{Point, Value};
use uclab::LabError;

const MINIMAL: &str = r#"{
  "protocol": "inductive",
  "process": {"kind": "iid_nat", "support": 10},
  "target": {"kind": "kappa", "kappa": 0.3, "partition": {"kind": "nat_singletons"}},
  "loss": {"values": {"kind": "binary"}, "loss": "zero_one"},
  "learner": {"rule": "memorize"},
  "train_sizes": [10, 100],
  "eval_horizon": 50,
  "seeds": [3, 1]
}"#;

fn with(key: &str, value: serde_json::Value) -> String {
    let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
    v[key] = value;
    v.to_string()
}

fn without(key: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
    v.as_object_mut().unwrap().remove(key);
    v.to_string()
}

fn paths(e: &LabError) -> Vec<String> {
    match e {
        LabError::Config { path, .. } => vec![path.clone()],
        LabError::Invalid(all) => all.iter().flat_map(paths).collect(),
        other => panic!("not a config error: {other}"),
    }
}

#[test]
fn minimal_config_round_trips() {
    let cfg = parse_config(MINIMAL).unwrap();
    let text = serde_json::to_string_pretty(&cfg).unwrap();
    let again = parse_config(&text).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(cfg.digest(), again.digest());
}

#[test]
fn decreasing_train_sizes_named() {
    let e = parse_config(&with("train_sizes", serde_json::json!([10, 5]))).unwrap_err();
    assert!(e.is_config());
    assert!(paths(&e).contains(&"train_sizes".to_string()), "{e}");
}

#[test]
fn missing_seed_rejected() {
    let e = parse_config(&without("seeds")).unwrap_err();
    assert!(paths(&e).contains(&"seeds".to_string()), "{e}");
}

#[test]
fn process_seed_is_shorthand() {
    let mut v: serde_json::Value = serde_json::from_str(&without("seeds")).unwrap();
    v["process"]["seed"] = 42.into();
    let cfg = parse_config(&v.to_string()).unwrap();
    assert_eq!(cfg.seeds, vec![42]);
}

#[test]
fn unknown_key_reports_path() {
    let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
    v["learner"]["shedule"] = serde_json::json!({});
    let e = parse_config(&v.to_string()).unwrap_err();
    let p = paths(&e);
    assert!(p[0].starts_with("learner"), "{e}");
}

#[test]
fn all_violations_collected() {
    let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
    v["train_sizes"] = serde_json::json!([10, 5]);
    v["eval_horizon"] = 0.into();
    v["limsup_window"] = 1.5.into();
    v["seeds"] = serde_json::json!([1, 1]);
    let e = parse_config(&v.to_string()).unwrap_err();
    let p = paths(&e);
    for key in ["train_sizes", "eval_horizon", "limsup_window", "seeds"] {
        assert!(p.iter().any(|x| x == key), "{key} missing from {e}");
    }
}

#[test]
fn target_values_must_fit_loss() {
    let e = parse_config(&with("target", serde_json::json!({"kind": "constant", "value": 2.0}))).unwrap_err();
    assert!(paths(&e).contains(&"target".to_string()), "{e}");
}

#[test]
fn protocol_sections_checked() {
    let e = parse_config(&with("protocol", "online".into())).unwrap_err();
    assert!(paths(&e).contains(&"online".to_string()), "{e}");
    let e = parse_config(&with("protocol", "self_adaptive".into())).unwrap_err();
    assert!(paths(&e).contains(&"learner.rule".to_string()), "{e}");
}

#[test]
fn step_cap_is_resource_error() {
    let mut cfg = parse_config(MINIMAL).unwrap();
    cfg.train_sizes = vec![60_000_000];
    let e = run_experiment(&cfg, Exec::Sequential).unwrap_err();
    assert!(matches!(e, LabError::Resource(_)), "{e}");
    cfg.caps = Some(uclab::harness::Caps {
        max_steps: 200_000_000,
        ..Default::default()
    });
    assert_eq!(cfg.warnings().len(), 1);
}

#[test]
fn nn_killer_horizon_enforced() {
    let text = r#"{
      "protocol": "inductive",
      "process": {"kind": "nn_killer"},
      "target": {"kind": "nn_killer"},
      "loss": {"values": {"kind": "binary"}, "loss": "zero_one"},
      "learner": {"rule": "nn"},
      "train_sizes": [65888130],
      "eval_horizon": 1,
      "seeds": [1]
    }"#;
    let cfg = parse_config(text).unwrap();
    assert!(matches!(run_experiment(&cfg, Exec::Sequential), Err(LabError::Resource(_))));
}

fn run_both(cfg: &ExperimentConfig) -> ExperimentTrace {
    let a = run_experiment(cfg, Exec::Sequential).unwrap();
    let b = run_experiment(cfg, Exec::Parallel).unwrap();
    assert_eq!(trace_csv(&a), trace_csv(&b));
    a
}

#[test]
fn rows_sorted_and_counted() {
    let cfg = parse_config(MINIMAL).unwrap();
    let trace = run_both(&cfg);
    assert_eq!(trace.records.len(), cfg.seeds.len() * cfg.train_sizes.len());
    let keys: Vec<_> = trace.records.iter().map(|r| (r.seed, r.n)).collect();
    assert_eq!(keys, vec![(1, 10), (1, 100), (3, 10), (3, 100)]);
    let csv = trace_csv(&trace);
    assert_eq!(csv.lines().count(), 1 + trace.records.len());
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    for r in &trace.records {
        assert!(r.avg_loss >= 0.0 && r.wmax_loss >= r.avg_loss - 1e-12);
        assert_eq!(r.ms, 0.0);
    }
}

#[test]
fn realizable_memorized_target_has_zero_loss() {
    let text = with("train_sizes", serde_json::json!([2000]));
    let cfg = parse_config(&text).unwrap();
    for r in run_both(&cfg).records {
        assert_eq!((r.avg_loss, r.wmax_loss), (0.0, 0.0));
    }
}

#[test]
fn empty_trace_is_header_only() {
    let cfg = parse_config(MINIMAL).unwrap();
    let mut trace = run_experiment(&cfg, Exec::Sequential).unwrap();
    trace.records.clear();
    assert_eq!(trace_csv(&trace), format!("{CSV_HEADER}\n"));
}

#[test]
fn trace_files_byte_identical() {
    let cfg = parse_config(MINIMAL).unwrap();
    let base = std::env::temp_dir().join(format!("uclab-harness-{}", std::process::id()));
    let (a, b) = (base.join("a"), base.join("b"));
    write_trace(&run_experiment(&cfg, Exec::Parallel).unwrap(), &cfg, &a).unwrap();
    write_trace(&run_experiment(&cfg, Exec::Parallel).unwrap(), &cfg, &b).unwrap();
    for f in ["trace.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_digest"], cfg.digest());
    std::fs::remove_dir_all(&base).unwrap();
}

#[test]
fn unwritable_path_reported() {
    let cfg = parse_config(MINIMAL).unwrap();
    let trace = run_experiment(&cfg, Exec::Sequential).unwrap();
    let file = std::env::temp_dir().join(format!("uclab-blocker-{}", std::process::id()));
    std::fs::write(&file, b"x").unwrap();
    let e = write_trace(&trace, &cfg, &file.join("sub")).unwrap_err();
    assert!(matches!(&e, LabError::Io { path, .. } if path.contains("uclab-blocker")), "{e}");
    std::fs::remove_file(file).unwrap();
}

#[test]
fn online_memorize_on_log_growth() {
    let text = r#"{
      "protocol": "online",
      "process": {"kind": "log_growth"},
      "target": {"kind": "constant", "value": 1},
      "loss": {"values": {"kind": "binary"}, "loss": "zero_one"},
      "online": {"rule": "memorize"},
      "train_sizes": [1023, 1048575],
      "seeds": [0]
    }"#;
    let cfg = parse_config(text).unwrap();
    let trace = run_experiment(&cfg, Exec::Sequential).unwrap();
    assert_eq!(trace.records[0].avg_loss, 10.0 / 1023.0);
    assert_eq!(trace.records[1].avg_loss, 20.0 / 1_048_575.0);
}

#[derive(Default)]
struct Audit {
    fit_lengths: Vec<usize>,
    labels_seen: Vec<usize>,
    queries: Vec<Point>,
    observed: Vec<Point>,
}

struct InductiveSpy(Arc<Mutex<Audit>>);

impl InductiveRule for InductiveSpy {
    fn name(&self) -> &'static str {
        "spy"
    }
    fn fit(&mut self, xs: &[Point], ys: &[Value]) -> uclab::Result<()> {
        let mut a = self.0.lock().unwrap();
        a.fit_lengths.push(xs.len());
        a.labels_seen.push(ys.len());
        Ok(())
    }
    fn predict(&self, x: &Point) -> uclab::Result<Value> {
        self.0.lock().unwrap().queries.push(*x);
        Ok(0.0)
    }
}

struct AdaptiveSpy(Arc<Mutex<Audit>>);

impl SelfAdaptiveRule for AdaptiveSpy {
    fn name(&self) -> &'static str {
        "spy"
    }
    fn fit(&mut self, xs: &[Point], ys: &[Value]) -> uclab::Result<()> {
        let mut a = self.0.lock().unwrap();
        a.fit_lengths.push(xs.len());
        a.labels_seen.push(ys.len());
        Ok(())
    }
    fn observe(&mut self, x: &Point) -> uclab::Result<()> {
        self.0.lock().unwrap().observed.push(*x);
        Ok(())
    }
    fn predict(&mut self, x: &Point) -> uclab::Result<Value> {
        self.0.lock().unwrap().queries.push(*x);
        Ok(0.0)
    }
}

#[test]
fn inductive_spy_sees_only_prefix() {
    let mut cfg = parse_config(MINIMAL).unwrap();
    cfg.seeds = vec![5];
    let audit = Arc::new(Mutex::new(Audit::default()));
    let make = || Ok(Box::new(InductiveSpy(audit.clone())) as Box<dyn InductiveRule>);
    run_with(&cfg, Learner::Inductive(&make), Exec::Sequential).unwrap();
    let a = audit.lock().unwrap();
    assert_eq!(a.fit_lengths, cfg.train_sizes);
    assert_eq!(a.labels_seen, cfg.train_sizes);
    let xs = make_process(&cfg.process, 5).unwrap().take(100 + cfg.eval_horizon);
    let mut expected = xs[10..60].to_vec();
    expected.extend_from_slice(&xs[100..150]);
    assert_eq!(a.queries, expected);
}

#[test]
fn self_adaptive_spy_never_sees_later_labels() {
    let mut cfg = parse_config(MINIMAL).unwrap();
    cfg.protocol = Protocol::SelfAdaptive;
    cfg.seeds = vec![9];
    let audit = Arc::new(Mutex::new(Audit::default()));
    let make = || Ok(Box::new(AdaptiveSpy(audit.clone())) as Box<dyn SelfAdaptiveRule>);
    run_with(&cfg, Learner::SelfAdaptive(&make), Exec::Sequential).unwrap();
    let a = audit.lock().unwrap();
    assert_eq!(a.labels_seen, cfg.train_sizes);
    let xs = make_process(&cfg.process, 9).unwrap().take(150);
    let mut expected = xs[10..60].to_vec();
    expected.extend_from_slice(&xs[100..150]);
    assert_eq!(a.queries, expected);
    assert_eq!(a.observed, expected);
}
