//! Inductive and self-adaptive learning rules.
//!
//! Inductive rules see `n` labeled points at fit time and nothing afterwards.
//! Self-adaptive rules additionally receive later points one at a time, but
//! the interface has no way to hand them a label past the first `n`.

pub mod adaptive;
pub mod basic;
pub mod schedule;
pub mod unbounded;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classes::{ClassConfig, ClassSchedule};
use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::spaces::{InstanceSpace, LossSpace, Point, Value};

pub use adaptive::{sual_index, sual_predict, AdaptiveModel, AdaptiveSession, PairProfiles, SelfAdaptive};
pub use basic::{erm_select, memorize_predict, nn_predict, Memorize, NearestNeighbor, PrefixMaxErm};
pub use schedule::{Epsilon, Gamma, Growth, ScheduleParams};
pub use unbounded::{chain_stages, unbounded_index_chain, ChainStage, UnboundedChain};

pub trait InductiveRule: Send {
    fn name(&self) -> &'static str;
    fn fit(&mut self, xs: &[Point], ys: &[Value]) -> Result<()>;
    fn predict(&self, x: &Point) -> Result<Value>;
}

pub trait SelfAdaptiveRule: Send {
    fn name(&self) -> &'static str;
    /// Starts over from the labeled sample `(xs, ys)`.
    fn fit(&mut self, xs: &[Point], ys: &[Value]) -> Result<()>;
    /// Appends an unlabeled point.
    fn observe(&mut self, x: &Point) -> Result<()>;
    fn predict(&mut self, x: &Point) -> Result<Value>;
}

pub(crate) fn check_sample(xs: &[Point], ys: &[Value]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(LabError::usage(format!(
            "{} points but {} labels",
            xs.len(),
            ys.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Nn,
    Memorize,
    Erm,
    SelfAdaptive,
    Unbounded,
}

impl RuleKind {
    pub const ALL: [RuleKind; 5] = [
        RuleKind::Nn,
        RuleKind::Memorize,
        RuleKind::Erm,
        RuleKind::SelfAdaptive,
        RuleKind::Unbounded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Nn => "nn",
            RuleKind::Memorize => "memorize",
            RuleKind::Erm => "erm",
            RuleKind::SelfAdaptive => "self_adaptive",
            RuleKind::Unbounded => "unbounded",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            RuleKind::Nn => "nearest neighbor on [0,1], ties to the smallest index",
            RuleKind::Memorize => "label of the first matching training point, else the default",
            RuleKind::Erm => "prefix-max empirical risk minimizer over a growing class",
            RuleKind::SelfAdaptive => "optimistically universal self-adaptive rule",
            RuleKind::Unbounded => "stability-chain rule for unbounded losses",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub rule: RuleKind,
    #[serde(default)]
    pub schedule: ScheduleParams,
    #[serde(default)]
    pub class: ClassConfig,
    /// Fallback prediction of the memorization rule.
    #[serde(default)]
    pub default: Value,
}

impl LearnerConfig {
    pub fn new(rule: RuleKind) -> Self {
        LearnerConfig {
            rule,
            schedule: ScheduleParams::default(),
            class: ClassConfig::default(),
            default: 0.0,
        }
    }

    pub fn class_schedule(&self, space: InstanceSpace, loss: &LossSpace) -> Result<ClassSchedule> {
        ClassSchedule::new(space, loss.values, &self.class)
    }

    pub fn build_inductive(&self, space: InstanceSpace, loss: &LossSpace) -> Result<Box<dyn InductiveRule>> {
        Ok(match self.rule {
            RuleKind::Nn => Box::new(NearestNeighbor::new()),
            RuleKind::Memorize => Box::new(Memorize::new(self.default)),
            RuleKind::Erm => Box::new(PrefixMaxErm::new(self.schedule, self.class_schedule(space, loss)?, *loss)?),
            RuleKind::Unbounded => Box::new(UnboundedChain::new(self.schedule, self.class_schedule(space, loss)?, *loss)?),
            RuleKind::SelfAdaptive => {
                return Err(LabError::config(
                    "learner.rule",
                    "self_adaptive runs under the self_adaptive protocol",
                ))
            }
        })
    }

    /// Shared model for the self-adaptive rule, sized for `max_labels`.
    pub fn adaptive_model(
        &self,
        space: InstanceSpace,
        loss: &LossSpace,
        max_labels: usize,
        exec: Exec,
    ) -> Result<Arc<AdaptiveModel>> {
        if self.rule != RuleKind::SelfAdaptive {
            return Err(LabError::config(
                "learner.rule",
                format!("{} is not a self-adaptive rule", self.rule.name()),
            ));
        }
        Ok(Arc::new(AdaptiveModel::new(
            self.schedule,
            self.class_schedule(space, loss)?,
            *loss,
            max_labels,
            exec,
        )?))
    }
}
