//! Declarative experiment runner and trace output.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classes::{DEFAULT_CLASS_CAP, HARD_CLASS_LIMIT};
use crate::empirical::limsup_proxy;
use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::learners::{InductiveRule, LearnerConfig, RuleKind, SelfAdaptive, SelfAdaptiveRule};
use crate::online::{OnlineConfig, OnlineRule, OnlineRuleKind, DEFAULT_EXPERTS};
use crate::processes::{make_process, PartitionSpec, ProcessSpec, TargetFunction, TargetSpec};
use crate::spaces::{InstanceSpace, LossSpace, Point, Value};

pub const TOOL_NAME: &str = "uclab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CSV_HEADER: &str = "seed,n,avg_loss,wmax_loss,ms";
pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Inductive,
    SelfAdaptive,
    Online,
}

/// Resource limits. Raising any of them is allowed but reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    #[serde(default = "max_steps")]
    pub max_steps: u64,
    #[serde(default = "max_class")]
    pub max_class: usize,
    #[serde(default = "max_experts")]
    pub max_experts: usize,
}

fn max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

fn max_class() -> usize {
    DEFAULT_CLASS_CAP
}

fn max_experts() -> usize {
    DEFAULT_EXPERTS
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_steps: DEFAULT_MAX_STEPS,
            max_class: DEFAULT_CLASS_CAP,
            max_experts: DEFAULT_EXPERTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub process: ProcessSpec,
    pub target: TargetSpec,
    pub loss: LossSpace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<LearnerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub online: Option<OnlineConfig>,
    pub train_sizes: Vec<usize>,
    #[serde(default = "eval_horizon")]
    pub eval_horizon: usize,
    #[serde(default = "window")]
    pub limsup_window: f64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Fill the `ms` column with wall-clock times. Off by default so traces
    /// are byte-identical across runs.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<Caps>,
}

fn eval_horizon() -> usize {
    1000
}

fn window() -> f64 {
    0.5
}

fn target_space(t: &TargetSpec) -> Option<InstanceSpace> {
    match t {
        TargetSpec::Constant { .. } => None,
        TargetSpec::Simple { space, .. } => Some(*space),
        TargetSpec::Dyadic { .. } | TargetSpec::NnKiller { .. } => Some(InstanceSpace::Unit),
        TargetSpec::Kappa { partition, .. } => match partition {
            PartitionSpec::NatSingletons => Some(InstanceSpace::Nat),
            PartitionSpec::Halvings => Some(InstanceSpace::Unit),
            PartitionSpec::Cells { cells } => cells.first().map(|c| c.space()),
        },
    }
}

/// Parses and validates a JSON config, reporting every violation found.
///
/// `process.seed` is accepted as shorthand for a one-element `seeds` list.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| LabError::Parse(format!("config is not valid JSON: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| LabError::config("", "config must be a JSON object"))?;
    let seed = obj
        .get_mut("process")
        .and_then(|p| p.as_object_mut())
        .and_then(|p| p.remove("seed"));
    if !obj.contains_key("seeds") {
        match seed {
            Some(s) => {
                obj.insert("seeds".into(), serde_json::Value::Array(vec![s]));
            }
            None => {
                return Err(LabError::config(
                    "seeds",
                    "missing; every run needs explicit seeds (or process.seed)",
                ))
            }
        }
    }
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        LabError::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })?;
    let mut errors = cfg.violations();
    match errors.len() {
        0 => Ok(cfg),
        1 => Err(errors.remove(0)),
        _ => Err(LabError::Invalid(errors)),
    }
}

impl ExperimentConfig {
    pub fn caps(&self) -> Caps {
        self.caps.clone().unwrap_or_default()
    }

    /// Every constraint violation, in a fixed order.
    pub fn violations(&self) -> Vec<LabError> {
        let mut out = Vec::new();
        let mut bad = |path: &str, msg: String| out.push(LabError::config(path, msg));
        if self.train_sizes.is_empty() {
            bad("train_sizes", "must not be empty".into());
        }
        if self.train_sizes.windows(2).any(|w| w[0] >= w[1]) {
            bad("train_sizes", "must be strictly increasing".into());
        }
        if self.train_sizes.first() == Some(&0) {
            bad("train_sizes", "sizes must be positive".into());
        }
        if self.eval_horizon == 0 {
            bad("eval_horizon", "must be at least 1".into());
        }
        if !(self.limsup_window > 0.0 && self.limsup_window <= 1.0) {
            bad("limsup_window", "must lie in (0,1]".into());
        }
        if self.seeds.is_empty() {
            bad("seeds", "must not be empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            bad("seeds", "must not repeat".into());
        }
        let space = self.process.space();
        let process_ok = match self.process.validate() {
            Ok(()) => true,
            Err(e) => {
                out.push(e);
                false
            }
        };
        let mut bad = |path: &str, msg: String| out.push(LabError::config(path, msg));
        match TargetFunction::from_spec(&self.target) {
            Ok(t) => {
                for v in t.values() {
                    if !self.loss.contains(v) {
                        bad("target", format!("value {v} is outside {}", self.loss));
                    }
                }
            }
            Err(e) => bad("target", e.to_string()),
        }
        if let Some(ts) = target_space(&self.target) {
            if process_ok && ts != space {
                bad("target", format!("target lives on {ts} but the process emits {space}"));
            }
        }
        let caps = self.caps();
        if caps.max_class > HARD_CLASS_LIMIT {
            bad("caps.max_class", format!("cannot exceed {HARD_CLASS_LIMIT}"));
        }
        if caps.max_steps == 0 || caps.max_experts == 0 {
            bad("caps", "limits must be positive".into());
        }
        match (self.protocol, &self.learner, &self.online) {
            (Protocol::Online, _, None) => bad("online", "required by the online protocol".into()),
            (Protocol::Inductive | Protocol::SelfAdaptive, _, Some(_)) => {
                bad("online", "only used by the online protocol".into())
            }
            (Protocol::Inductive | Protocol::SelfAdaptive, None, _) => {
                bad("learner", "required by this protocol".into())
            }
            _ => {}
        }
        if let Some(l) = &self.learner {
            match (self.protocol, l.rule) {
                (Protocol::Inductive, RuleKind::SelfAdaptive) => {
                    bad("learner.rule", "self_adaptive needs the self_adaptive protocol".into())
                }
                (Protocol::SelfAdaptive, r) if r != RuleKind::SelfAdaptive => bad(
                    "learner.rule",
                    format!("{} is inductive; use the inductive protocol", r.name()),
                ),
                _ => {}
            }
            if l.rule == RuleKind::Nn && space != InstanceSpace::Unit {
                bad("learner.rule", "nn runs on the unit interval".into());
            }
            if l.rule == RuleKind::Memorize && !self.loss.contains(l.default) {
                bad("learner.default", format!("{} is outside {}", l.default, self.loss));
            }
            let uses_schedule = matches!(l.rule, RuleKind::Erm | RuleKind::SelfAdaptive | RuleKind::Unbounded)
                || self.protocol == Protocol::Online;
            if uses_schedule {
                let check = if l.rule == RuleKind::Unbounded {
                    l.schedule.validate_chain()
                } else {
                    l.schedule.validate(&self.loss)
                };
                if let Err(e) = check {
                    out.push(prefix_path(e, "learner"));
                }
                if let Err(e) = l.class_schedule(space, &self.loss) {
                    out.push(prefix_path(e, "learner"));
                }
                if l.class.cap > caps.max_class {
                    out.push(LabError::config(
                        "learner.class.cap",
                        format!("{} exceeds caps.max_class = {}", l.class.cap, caps.max_class),
                    ));
                }
                if matches!(l.rule, RuleKind::SelfAdaptive) && !self.loss.sup_loss().is_finite() {
                    out.push(LabError::config("learner.rule", "self_adaptive needs a bounded loss"));
                }
            }
        }
        if let Some(o) = &self.online {
            let mut bad = |path: &str, msg: String| out.push(LabError::config(path, msg));
            if !(o.b > 0.0 && o.b < 1.0) {
                bad("online.b", "must lie in (0,1)".into());
            }
            if o.rule == OnlineRuleKind::Aggregate {
                if o.i_max == 0 {
                    bad("online.i_max", "must be positive".into());
                }
                if o.i_max > caps.max_experts {
                    bad("online.i_max", format!("{} exceeds caps.max_experts = {}", o.i_max, caps.max_experts));
                }
                if !self.loss.sup_loss().is_finite() {
                    bad("online.rule", "aggregation needs a bounded loss".into());
                }
            }
            if !(o.epsilon >= 0.0 && o.epsilon.is_finite()) {
                bad("online.epsilon", "must be finite and nonnegative".into());
            }
            if !self.loss.contains(o.default) {
                bad("online.default", format!("{} is outside {}", o.default, self.loss));
            }
        }
        out
    }

    /// Notes about raised caps.
    pub fn warnings(&self) -> Vec<String> {
        let (c, d) = (self.caps(), Caps::default());
        let mut w = Vec::new();
        if c.max_steps > d.max_steps {
            w.push(format!("caps.max_steps raised to {} (default {})", c.max_steps, d.max_steps));
        }
        if c.max_class > d.max_class {
            w.push(format!("caps.max_class raised to {} (default {})", c.max_class, d.max_class));
        }
        if c.max_experts > d.max_experts {
            w.push(format!("caps.max_experts raised to {} (default {})", c.max_experts, d.max_experts));
        }
        w
    }

    /// Points drawn per seed.
    pub fn steps_per_seed(&self) -> u64 {
        let top = self.train_sizes.iter().copied().max().unwrap_or(0) as u64;
        match self.protocol {
            Protocol::Online => top,
            _ => top + self.eval_horizon as u64,
        }
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("configs serialize");
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn check_resources(&self) -> Result<()> {
        let caps = self.caps();
        let per_seed = self.steps_per_seed();
        let total = per_seed.saturating_mul(self.seeds.len() as u64);
        if total > caps.max_steps {
            return Err(LabError::Resource(format!(
                "{total} stream steps requested, cap is {} (raise caps.max_steps)",
                caps.max_steps
            )));
        }
        if let Some(cap) = self.process.horizon_cap() {
            if per_seed > cap {
                return Err(LabError::Resource(format!(
                    "{} supports at most {cap} steps, {per_seed} requested",
                    self.process.name()
                )));
            }
        }
        Ok(())
    }
}

fn prefix_path(e: LabError, prefix: &str) -> LabError {
    match e {
        LabError::Config { path, message } if !path.starts_with(prefix) => LabError::Config {
            path: format!("{prefix}.{}", path.trim_start_matches("learner.")),
            message,
        },
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub seed: u64,
    pub n: usize,
    pub avg_loss: f64,
    pub wmax_loss: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentTrace {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_digest: String,
    pub protocol: Protocol,
    pub process: String,
    pub warnings: Vec<String>,
    pub records: Vec<TraceRecord>,
}

/// Rule constructors, one fresh rule per `(seed, n)` (or per seed online).
pub enum Learner<'a> {
    Inductive(&'a (dyn Fn() -> Result<Box<dyn InductiveRule>> + Sync)),
    SelfAdaptive(&'a (dyn Fn() -> Result<Box<dyn SelfAdaptiveRule>> + Sync)),
    Online(&'a (dyn Fn() -> Result<Box<dyn OnlineRule>> + Sync)),
}

/// First prefix length of the trailing window of `len` losses.
pub fn window_start(len: usize, fraction: f64) -> usize {
    let w = ((fraction * len as f64).ceil() as usize).clamp(1, len.max(1));
    len + 1 - w
}

fn summarize(losses: &[f64], fraction: f64) -> Result<(f64, f64)> {
    let avg = losses.iter().sum::<f64>() / losses.len() as f64;
    let wmax = limsup_proxy(losses, window_start(losses.len(), fraction))?;
    Ok((avg, wmax))
}

/// Runs the configured rule.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentTrace> {
    let space = cfg.process.space();
    match cfg.protocol {
        Protocol::Inductive => {
            let l = cfg
                .learner
                .as_ref()
                .ok_or_else(|| LabError::config("learner", "required by this protocol"))?;
            l.build_inductive(space, &cfg.loss)?;
            let make = || l.build_inductive(space, &cfg.loss);
            run_with(cfg, Learner::Inductive(&make), exec)
        }
        Protocol::SelfAdaptive => {
            let l = cfg
                .learner
                .as_ref()
                .ok_or_else(|| LabError::config("learner", "required by this protocol"))?;
            cfg.check_resources()?;
            let top = cfg.train_sizes.iter().copied().max().unwrap_or(0);
            let model = l.adaptive_model(space, &cfg.loss, top, exec)?;
            let make = || Ok(Box::new(SelfAdaptive::new(model.clone())) as Box<dyn SelfAdaptiveRule>);
            run_with(cfg, Learner::SelfAdaptive(&make), exec)
        }
        Protocol::Online => {
            let o = cfg
                .online
                .as_ref()
                .ok_or_else(|| LabError::config("online", "required by the online protocol"))?;
            cfg.check_resources()?;
            let model = match (o.rule, o.expert) {
                (OnlineRuleKind::Aggregate, crate::online::ExpertKind::Wrapper) => {
                    let base = cfg.learner.clone().unwrap_or_else(|| LearnerConfig::new(RuleKind::SelfAdaptive));
                    let base = LearnerConfig {
                        rule: RuleKind::SelfAdaptive,
                        ..base
                    };
                    Some(base.adaptive_model(space, &cfg.loss, o.i_max, exec)?)
                }
                _ => None,
            };
            let make = || o.build_with_model(space, &cfg.loss, model.clone());
            run_with(cfg, Learner::Online(&make), exec)
        }
    }
}

/// Runs `learner` under the config's protocol. Seeds run concurrently;
/// records come back sorted by `(seed, n)`.
pub fn run_with(cfg: &ExperimentConfig, learner: Learner<'_>, exec: Exec) -> Result<ExperimentTrace> {
    cfg.check_resources()?;
    let target = TargetFunction::from_spec(&cfg.target)?;
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    let per_seed = exec.map_tasks(&seeds, |&seed| run_seed(cfg, &target, &learner, seed));
    let mut records: Vec<TraceRecord> = per_seed.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.seed, r.n));
    Ok(ExperimentTrace {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        config_digest: cfg.digest(),
        protocol: cfg.protocol,
        process: cfg.process.name().to_string(),
        warnings: cfg.warnings(),
        records,
    })
}

fn labeled_sample(cfg: &ExperimentConfig, target: &TargetFunction, seed: u64) -> Result<(Vec<Point>, Vec<Value>)> {
    let len = cfg.steps_per_seed() as usize;
    let xs = make_process(&cfg.process, seed)?.take(len);
    let ys = xs.iter().map(|x| target.eval(x)).collect::<Result<Vec<_>>>()?;
    if let Some(y) = ys.iter().find(|y| !cfg.loss.contains(**y)) {
        return Err(LabError::config("target", format!("label {y} is outside {}", cfg.loss)));
    }
    Ok((xs, ys))
}

fn run_seed(cfg: &ExperimentConfig, target: &TargetFunction, learner: &Learner<'_>, seed: u64) -> Result<Vec<TraceRecord>> {
    let (xs, ys) = labeled_sample(cfg, target, seed)?;
    let m = cfg.eval_horizon;
    let space = &cfg.loss;
    let elapsed = |start: Instant| {
        if cfg.record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    };
    let mut out = Vec::with_capacity(cfg.train_sizes.len());
    match learner {
        Learner::Inductive(make) => {
            for &n in &cfg.train_sizes {
                let start = Instant::now();
                let mut rule = make()?;
                rule.fit(&xs[..n], &ys[..n])?;
                let losses = (n..n + m)
                    .map(|t| space.loss(rule.predict(&xs[t])?, ys[t]))
                    .collect::<Result<Vec<_>>>()?;
                let (avg, wmax) = summarize(&losses, cfg.limsup_window)?;
                out.push(TraceRecord {
                    seed,
                    n,
                    avg_loss: avg,
                    wmax_loss: wmax,
                    ms: elapsed(start),
                });
            }
        }
        Learner::SelfAdaptive(make) => {
            for &n in &cfg.train_sizes {
                let start = Instant::now();
                let mut rule = make()?;
                rule.fit(&xs[..n], &ys[..n])?;
                let mut losses = Vec::with_capacity(m);
                for t in n..n + m {
                    losses.push(space.loss(rule.predict(&xs[t])?, ys[t])?);
                    rule.observe(&xs[t])?;
                }
                let (avg, wmax) = summarize(&losses, cfg.limsup_window)?;
                out.push(TraceRecord {
                    seed,
                    n,
                    avg_loss: avg,
                    wmax_loss: wmax,
                    ms: elapsed(start),
                });
            }
        }
        Learner::Online(make) => {
            let start = Instant::now();
            let mut rule = make()?;
            let mut losses = Vec::with_capacity(xs.len());
            let mut next = 0;
            for (t, (x, &y)) in xs.iter().zip(&ys).enumerate() {
                losses.push(space.loss(rule.predict(x)?, y)?);
                rule.feed(y)?;
                if next < cfg.train_sizes.len() && cfg.train_sizes[next] == t + 1 {
                    let (avg, wmax) = summarize(&losses, cfg.limsup_window)?;
                    out.push(TraceRecord {
                        seed,
                        n: t + 1,
                        avg_loss: avg,
                        wmax_loss: wmax,
                        ms: elapsed(start),
                    });
                    next += 1;
                }
            }
        }
    }
    Ok(out)
}

/// C-style `%.{digits}g` formatting.
pub fn format_g(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (p as i32 - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV body with the fixed header; numbers carry 12 significant digits.
pub fn trace_csv(trace: &ExperimentTrace) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.seed,
            r.n,
            format_g(r.avg_loss, 12),
            format_g(r.wmax_loss, 12),
            format_g(r.ms, 12)
        );
    }
    s
}

/// Writes `trace.csv` and `summary.json` into `dir`.
pub fn write_trace(trace: &ExperimentTrace, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir.display(), e))?;
    let csv = dir.join("trace.csv");
    std::fs::write(&csv, trace_csv(trace)).map_err(|e| LabError::io(csv.display(), e))?;
    let summary = serde_json::json!({
        "tool": trace.tool,
        "version": trace.version,
        "config_digest": trace.config_digest,
        "protocol": trace.protocol,
        "process": trace.process,
        "rows": trace.records.len(),
        "warnings": trace.warnings,
        "config": cfg,
    });
    let json = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&json, text + "\n").map_err(|e| LabError::io(json.display(), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format_matches_c() {
        assert_eq!(format_g(20.0 / 1048575.0, 12), "1.9073504518e-05");
        assert_eq!(format_g(1.0 / 1048576.0, 12), "9.53674316406e-07");
        assert_eq!(format_g(0.5, 12), "0.5");
        assert_eq!(format_g(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(format_g(2.0 / 3.0, 12), "0.666666666667");
        assert_eq!(format_g(123456.0, 12), "123456");
        assert_eq!(format_g(1e12, 12), "1e+12");
        assert_eq!(format_g(0.0001, 12), "0.0001");
        assert_eq!(format_g(0.00001, 12), "1e-05");
        assert_eq!(format_g(0.0, 12), "0");
    }

    #[test]
    fn window_start_examples() {
        assert_eq!(window_start(1000, 0.5), 501);
        assert_eq!(window_start(1000, 1.0), 1);
        assert_eq!(window_start(1, 0.5), 1);
        assert_eq!(window_start(10, 0.01), 10);
    }
}
