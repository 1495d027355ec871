//! Online protocol: predict `x_{t+1}`, then observe `y_{t+1}`.

pub mod aggregate;

use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::classes::dense_grid;
use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::learners::{AdaptiveModel, AdaptiveSession, LearnerConfig, RuleKind};
use crate::spaces::{InstanceSpace, LossSpace, Point, PointKey, Value};

pub use aggregate::{aggregate_predict, aggregate_weights, regret_bound, truncated_prior, AggregatorState};

/// An online rule. Every `predict` must be followed by exactly one `feed`.
pub trait OnlineRule: Send {
    fn name(&self) -> &'static str;
    fn predict(&mut self, x: &Point) -> Result<Value>;
    fn feed(&mut self, y: Value) -> Result<()>;
}

/// Tracks the predict/feed alternation.
#[derive(Debug, Clone, Default)]
struct Turn {
    pending: Option<Point>,
}

impl Turn {
    fn open(&mut self, x: &Point) -> Result<()> {
        if self.pending.is_some() {
            return Err(LabError::Protocol("predict called twice without feed".into()));
        }
        self.pending = Some(*x);
        Ok(())
    }

    fn close(&mut self) -> Result<Point> {
        self.pending
            .take()
            .ok_or_else(|| LabError::Protocol("feed without a pending prediction".into()))
    }
}

/// Repeats the first label seen at a point; `default` on fresh points.
#[derive(Debug, Clone)]
pub struct OnlineMemorize {
    seen: FxHashMap<PointKey, Value>,
    default: Value,
    turn: Turn,
}

impl OnlineMemorize {
    pub fn new(default: Value) -> Self {
        OnlineMemorize {
            seen: FxHashMap::default(),
            default,
            turn: Turn::default(),
        }
    }
}

impl OnlineRule for OnlineMemorize {
    fn name(&self) -> &'static str {
        "memorize"
    }

    fn predict(&mut self, x: &Point) -> Result<Value> {
        self.turn.open(x)?;
        Ok(self.seen.get(&x.key()).copied().unwrap_or(self.default))
    }

    fn feed(&mut self, y: Value) -> Result<()> {
        let x = self.turn.close()?;
        self.seen.entry(x.key()).or_insert(y);
        Ok(())
    }
}

/// Always predicts one value.
#[derive(Debug, Clone)]
pub struct OnlineConstant {
    value: Value,
    turn: Turn,
}

impl OnlineConstant {
    pub fn new(value: Value) -> Self {
        OnlineConstant {
            value,
            turn: Turn::default(),
        }
    }
}

impl OnlineRule for OnlineConstant {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn predict(&mut self, x: &Point) -> Result<Value> {
        self.turn.open(x)?;
        Ok(self.value)
    }

    fn feed(&mut self, _y: Value) -> Result<()> {
        self.turn.close().map(|_| ())
    }
}

/// Online use of the self-adaptive rule that keeps only the first `i` labels.
///
/// Before `i` labels have arrived it predicts `y0`; afterwards it runs the
/// self-adaptive rule trained on those labels over every point seen.
#[derive(Debug, Clone)]
pub struct ExpertWrapper {
    i: usize,
    y0: Value,
    model: Arc<AdaptiveModel>,
    xs: Vec<Point>,
    ys: Vec<Value>,
    session: Option<AdaptiveSession>,
    turn: Turn,
}

impl ExpertWrapper {
    pub fn new(i: usize, y0: Value, model: Arc<AdaptiveModel>) -> Result<Self> {
        if i == 0 {
            return Err(LabError::config("online.expert", "wrapper index starts at 1"));
        }
        Ok(ExpertWrapper {
            i,
            y0,
            model,
            xs: Vec::with_capacity(i),
            ys: Vec::with_capacity(i),
            session: None,
            turn: Turn::default(),
        })
    }
}

impl OnlineRule for ExpertWrapper {
    fn name(&self) -> &'static str {
        "wrapper"
    }

    fn predict(&mut self, x: &Point) -> Result<Value> {
        self.turn.open(x)?;
        Ok(match self.session.as_mut() {
            Some(s) => s.predict(x),
            None => self.y0,
        })
    }

    fn feed(&mut self, y: Value) -> Result<()> {
        let x = self.turn.close()?;
        match self.session.as_mut() {
            Some(s) => s.observe(&x),
            None => {
                self.xs.push(x);
                self.ys.push(y);
                if self.xs.len() == self.i {
                    self.session = Some(self.model.session(&self.xs, &self.ys)?);
                    self.xs = Vec::new();
                    self.ys = Vec::new();
                }
            }
        }
        Ok(())
    }
}

/// Per-step record of the aggregator, for checking its guarantees.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStep {
    pub weights: Vec<f64>,
    pub expert_preds: Vec<Value>,
    pub prediction: Value,
    /// Weighted normalized expert loss once the label is known.
    pub mixed_loss: f64,
    pub loss: f64,
}

/// Deterministic exponential-weights aggregation over an expert bank.
pub struct Aggregate {
    state: AggregatorState,
    experts: Vec<Box<dyn OnlineRule>>,
    space: LossSpace,
    lbar: f64,
    eps: f64,
    pending: Option<(Vec<f64>, Vec<Value>, Value)>,
    last: Option<AggregateStep>,
}

impl Aggregate {
    pub fn new(b: f64, experts: Vec<Box<dyn OnlineRule>>, space: LossSpace, eps: f64) -> Result<Self> {
        let lbar = space.sup_loss();
        if !lbar.is_finite() || lbar <= 0.0 {
            return Err(LabError::config("online.rule", "aggregation needs a bounded loss"));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(LabError::config("online.epsilon", "must be finite and nonnegative"));
        }
        Ok(Aggregate {
            state: AggregatorState::new(b, experts.len())?,
            experts,
            space,
            lbar,
            eps,
            pending: None,
            last: None,
        })
    }

    pub fn state(&self) -> &AggregatorState {
        &self.state
    }

    /// The step completed by the latest `feed`.
    pub fn last_step(&self) -> Option<&AggregateStep> {
        self.last.as_ref()
    }
}

impl OnlineRule for Aggregate {
    fn name(&self) -> &'static str {
        "aggregate"
    }

    fn predict(&mut self, x: &Point) -> Result<Value> {
        if self.pending.is_some() {
            return Err(LabError::Protocol("predict called twice without feed".into()));
        }
        let preds = self.experts.iter_mut().map(|e| e.predict(x)).collect::<Result<Vec<_>>>()?;
        let v = self.state.weights()?;
        let y = aggregate_predict(&v, &preds, &self.space, self.eps);
        self.pending = Some((v, preds, y));
        Ok(y)
    }

    fn feed(&mut self, y: Value) -> Result<()> {
        let (v, preds, yhat) = self
            .pending
            .take()
            .ok_or_else(|| LabError::Protocol("feed without a pending prediction".into()))?;
        let z: Vec<f64> = preds.iter().map(|&p| self.space.eval(p, y) / self.lbar).collect();
        for e in &mut self.experts {
            e.feed(y)?;
        }
        self.state.update(&z)?;
        self.last = Some(AggregateStep {
            mixed_loss: v.iter().zip(&z).map(|(a, b)| a * b).sum(),
            loss: self.space.eval(yhat, y),
            weights: v,
            expert_preds: preds,
            prediction: yhat,
        });
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnlineRuleKind {
    Memorize,
    Aggregate,
}

impl OnlineRuleKind {
    pub const ALL: [OnlineRuleKind; 2] = [OnlineRuleKind::Memorize, OnlineRuleKind::Aggregate];

    pub fn name(self) -> &'static str {
        match self {
            OnlineRuleKind::Memorize => "memorize",
            OnlineRuleKind::Aggregate => "aggregate",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            OnlineRuleKind::Memorize => "label of the first revealed copy of the point, else the default",
            OnlineRuleKind::Aggregate => "exponential weights over wrapped self-adaptive experts",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertKind {
    /// Expert `i` wraps the self-adaptive rule with `i` labels.
    Wrapper,
    /// Expert `i` memorizes with the `i`-th grid value as default.
    Memorize,
    /// Expert `i` predicts the `i`-th grid value.
    Constant,
}

/// Default bank size.
pub const DEFAULT_EXPERTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineConfig {
    pub rule: OnlineRuleKind,
    #[serde(default = "half")]
    pub b: f64,
    #[serde(default = "experts")]
    pub i_max: usize,
    #[serde(default = "wrapper")]
    pub expert: ExpertKind,
    /// Prediction `y0` for fresh points and not-yet-active experts.
    #[serde(default)]
    pub default: Value,
    /// Slack of the aggregated argmin.
    #[serde(default)]
    pub epsilon: f64,
}

fn half() -> f64 {
    0.5
}

fn experts() -> usize {
    DEFAULT_EXPERTS
}

fn wrapper() -> ExpertKind {
    ExpertKind::Wrapper
}

impl OnlineConfig {
    pub fn new(rule: OnlineRuleKind) -> Self {
        OnlineConfig {
            rule,
            b: 0.5,
            i_max: DEFAULT_EXPERTS,
            expert: ExpertKind::Wrapper,
            default: 0.0,
            epsilon: 0.0,
        }
    }

    /// Builds the rule. `base` configures the wrapped self-adaptive rule.
    pub fn build(
        &self,
        space: InstanceSpace,
        loss: &LossSpace,
        base: Option<&LearnerConfig>,
        exec: Exec,
    ) -> Result<Box<dyn OnlineRule>> {
        let model = match (self.rule, self.expert) {
            (OnlineRuleKind::Aggregate, ExpertKind::Wrapper) => {
                let cfg = base.cloned().unwrap_or_else(|| LearnerConfig::new(RuleKind::SelfAdaptive));
                let cfg = LearnerConfig {
                    rule: RuleKind::SelfAdaptive,
                    ..cfg
                };
                Some(cfg.adaptive_model(space, loss, self.i_max, exec)?)
            }
            _ => None,
        };
        self.build_with_model(space, loss, model)
    }

    /// Builds the rule around an already prepared self-adaptive model, which
    /// is required for the wrapper bank.
    pub fn build_with_model(
        &self,
        space: InstanceSpace,
        loss: &LossSpace,
        model: Option<Arc<AdaptiveModel>>,
    ) -> Result<Box<dyn OnlineRule>> {
        let _ = space;
        if !loss.contains(self.default) {
            return Err(LabError::config("online.default", format!("{} is not a value of {loss}", self.default)));
        }
        match self.rule {
            OnlineRuleKind::Memorize => Ok(Box::new(OnlineMemorize::new(self.default))),
            OnlineRuleKind::Aggregate => {
                if self.i_max == 0 {
                    return Err(LabError::config("online.i_max", "need at least one expert"));
                }
                let grid = dense_grid(loss.values, self.i_max);
                let value = |i: usize| grid[i % grid.len()];
                let experts: Vec<Box<dyn OnlineRule>> = match self.expert {
                    ExpertKind::Constant => (0..self.i_max)
                        .map(|i| Box::new(OnlineConstant::new(value(i))) as Box<dyn OnlineRule>)
                        .collect(),
                    ExpertKind::Memorize => (0..self.i_max)
                        .map(|i| Box::new(OnlineMemorize::new(value(i))) as Box<dyn OnlineRule>)
                        .collect(),
                    ExpertKind::Wrapper => {
                        let model = model.ok_or_else(|| LabError::usage("the wrapper bank needs a self-adaptive model"))?;
                        (1..=self.i_max)
                            .map(|i| {
                                ExpertWrapper::new(i, self.default, model.clone())
                                    .map(|w| Box::new(w) as Box<dyn OnlineRule>)
                            })
                            .collect::<Result<_>>()?
                    }
                };
                Ok(Box::new(Aggregate::new(self.b, experts, *loss, self.epsilon)?))
            }
        }
    }
}
