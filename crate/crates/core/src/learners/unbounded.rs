//! Stability-chain rule for unbounded losses.
//!
//! Members `f_1, f_2, ...` of the class enumeration are scanned with accuracy
//! levels `eps_0 = inf`, `eps_k = 2^-k`. Stage `k` picks the first member with
//! training loss at most `eps_k` everywhere that also stays within
//! `eps_{k-1} + eps_k` of the previous pick at every point of the space;
//! if none qualifies the previous pick is kept.

use crate::classes::{ClassSchedule, FunctionClass, HARD_CLASS_LIMIT};
use crate::error::{LabError, Result};
use crate::spaces::{LossSpace, Point, Value};

use super::schedule::ScheduleParams;
use super::{check_sample, InductiveRule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainStage {
    pub k: u64,
    /// 1-based member index after stage `k`.
    pub index: usize,
    /// Whether some member satisfied both constraints.
    pub found: bool,
}

/// Runs the chain for `k = 1..=k_n` over members `1..=i_n`. Stage 0 is member 1.
pub fn chain_stages(
    class: &FunctionClass,
    xs: &[Point],
    ys: &[Value],
    i_n: usize,
    k_n: u64,
    space: &LossSpace,
) -> Result<Vec<ChainStage>> {
    check_sample(xs, ys)?;
    if xs.is_empty() {
        return Err(LabError::usage("the chain rule needs at least one labeled point"));
    }
    if i_n == 0 || i_n > class.len() {
        return Err(LabError::usage(format!("i_n = {i_n} outside 1..={}", class.len())));
    }
    let idx = class.indexer();
    let cells: Vec<usize> = xs.iter().map(|x| idx.cell_of(x)).collect();
    let train_max: Vec<f64> = (0..i_n)
        .map(|j| {
            let row = class.row(j);
            cells
                .iter()
                .zip(ys)
                .map(|(&c, &y)| space.eval(row[c], y))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut prev = 0usize;
    let mut out = Vec::with_capacity(k_n as usize);
    for k in 1..=k_n {
        let eps = ScheduleParams::chain_epsilon(k);
        let slack = ScheduleParams::chain_epsilon(k - 1) + eps;
        let pick = (0..i_n).find(|&j| train_max[j] <= eps && (k == 1 || class.sup_distance(j, prev, space) <= slack));
        if let Some(j) = pick {
            prev = j;
        }
        out.push(ChainStage {
            k,
            index: prev + 1,
            found: pick.is_some(),
        });
    }
    Ok(out)
}

/// Final chain index `i_hat(n, k_n)`, 1-based.
pub fn unbounded_index_chain(
    xs: &[Point],
    ys: &[Value],
    i_n: usize,
    k_n: u64,
    classes: &ClassSchedule,
    space: &LossSpace,
) -> Result<usize> {
    let class = FunctionClass::from_members(classes.space, classes.values, classes.members(i_n)?)?;
    Ok(chain_stages(&class, xs, ys, i_n, k_n, space)?.last().map_or(1, |s| s.index))
}

#[derive(Debug, Clone)]
pub struct UnboundedChain {
    schedule: ScheduleParams,
    classes: ClassSchedule,
    space: LossSpace,
    class: Option<FunctionClass>,
    stages: Vec<ChainStage>,
    chosen: usize,
}

impl UnboundedChain {
    pub fn new(schedule: ScheduleParams, classes: ClassSchedule, space: LossSpace) -> Result<Self> {
        schedule.validate_chain()?;
        Ok(UnboundedChain {
            schedule,
            classes,
            space,
            class: None,
            stages: Vec::new(),
            chosen: 0,
        })
    }

    /// Stages of the last fit.
    pub fn stages(&self) -> &[ChainStage] {
        &self.stages
    }

    pub fn class(&self) -> Option<&FunctionClass> {
        self.class.as_ref()
    }
}

impl InductiveRule for UnboundedChain {
    fn name(&self) -> &'static str {
        "unbounded"
    }

    fn fit(&mut self, xs: &[Point], ys: &[Value]) -> Result<()> {
        check_sample(xs, ys)?;
        let n = xs.len() as u64;
        if n == 0 {
            self.class = Some(FunctionClass::from_members(
                self.classes.space,
                self.classes.values,
                self.classes.members(1)?,
            )?);
            self.chosen = 0;
            self.stages.clear();
            return Ok(());
        }
        let i_n = self.schedule.i_n.at(n) as usize;
        if i_n > HARD_CLASS_LIMIT {
            return Err(LabError::Resource(format!("i_n = {i_n} exceeds {HARD_CLASS_LIMIT}")));
        }
        if self.class.as_ref().is_none_or(|c| c.len() < i_n) {
            self.class = Some(FunctionClass::from_members(
                self.classes.space,
                self.classes.values,
                self.classes.members(i_n)?,
            )?);
        }
        let class = self.class.as_ref().unwrap();
        self.stages = chain_stages(class, xs, ys, i_n, self.schedule.k_n.at(n), &self.space)?;
        self.chosen = self.stages.last().map_or(1, |s| s.index) - 1;
        Ok(())
    }

    fn predict(&self, x: &Point) -> Result<Value> {
        let class = self
            .class
            .as_ref()
            .ok_or_else(|| LabError::Protocol("predict before fit".into()))?;
        Ok(class.eval(self.chosen, x))
    }
}
