use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Labels are carried as `f64`; integer-valued spaces use exact integers.
pub type Value = f64;

/// Map from a dominating metric to the loss it bounds.
pub type Transfer = fn(f64) -> f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueSpace {
    Binary,
    Labels { k: u32 },
    Natural,
    UnitReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    ZeroOne,
    Absolute,
    Squared,
}

/// A value space paired with a loss on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpace {
    pub values: ValueSpace,
    pub loss: LossKind,
}

impl LossSpace {
    pub const fn new(values: ValueSpace, loss: LossKind) -> Self {
        LossSpace { values, loss }
    }

    pub const fn binary_zero_one() -> Self {
        LossSpace::new(ValueSpace::Binary, LossKind::ZeroOne)
    }

    pub fn contains(&self, y: Value) -> bool {
        match self.values {
            ValueSpace::Binary => y == 0.0 || y == 1.0,
            ValueSpace::Labels { k } => y >= 0.0 && y < k as f64 && y.fract() == 0.0,
            ValueSpace::Natural => y >= 0.0 && y.fract() == 0.0 && y <= 9_007_199_254_740_992.0,
            ValueSpace::UnitReal => (0.0..=1.0).contains(&y),
        }
    }

    /// Loss with membership checks on both arguments.
    pub fn loss(&self, y1: Value, y2: Value) -> Result<f64> {
        for y in [y1, y2] {
            if !self.contains(y) {
                return Err(LabError::usage(format!("value {y} outside value space {self}")));
            }
        }
        Ok(self.eval(y1, y2))
    }

    /// Loss without membership checks; callers guarantee both values lie in
    /// the space.
    #[inline]
    pub fn eval(&self, y1: Value, y2: Value) -> f64 {
        match self.loss {
            LossKind::ZeroOne => {
                if y1 == y2 {
                    0.0
                } else {
                    1.0
                }
            }
            LossKind::Absolute => (y1 - y2).abs(),
            LossKind::Squared => (y1 - y2) * (y1 - y2),
        }
    }

    /// `sup` of the loss over pairs of values; `+inf` on unbounded ranges.
    pub fn sup_loss(&self) -> f64 {
        let diameter = match self.values {
            ValueSpace::Binary | ValueSpace::UnitReal => 1.0,
            ValueSpace::Labels { k } => k.saturating_sub(1) as f64,
            ValueSpace::Natural => f64::INFINITY,
        };
        match self.loss {
            LossKind::ZeroOne => 1.0,
            LossKind::Absolute => diameter,
            LossKind::Squared => diameter * diameter,
        }
    }

    pub fn is_metric(&self) -> bool {
        !matches!(self.loss, LossKind::Squared)
    }

    /// For non-metric losses, the metric that dominates them together with the
    /// transfer function `phi`: `loss(y, y') = phi(metric(y, y'))`.
    pub fn dominating_metric(&self) -> Option<(LossSpace, Transfer)> {
        match self.loss {
            LossKind::Squared => Some((LossSpace::new(self.values, LossKind::Absolute), |x| x * x)),
            _ => None,
        }
    }

    /// Every value of a finite space, in increasing order.
    pub fn finite_values(&self) -> Option<Vec<Value>> {
        match self.values {
            ValueSpace::Binary => Some(vec![0.0, 1.0]),
            ValueSpace::Labels { k } => Some((0..k).map(f64::from).collect()),
            _ => None,
        }
    }
}

impl fmt::Display for LossSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values = match self.values {
            ValueSpace::Binary => "binary".to_string(),
            ValueSpace::Labels { k } => format!("labels({k})"),
            ValueSpace::Natural => "natural".to_string(),
            ValueSpace::UnitReal => "unit_real".to_string(),
        };
        let loss = match self.loss {
            LossKind::ZeroOne => "zero_one",
            LossKind::Absolute => "absolute",
            LossKind::Squared => "squared",
        };
        write!(f, "{values}/{loss}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stated_loss_values() {
        let zo = LossSpace::binary_zero_one();
        assert_eq!(zo.loss(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(zo.loss(0.0, 1.0).unwrap(), 1.0);
        let abs = LossSpace::new(ValueSpace::UnitReal, LossKind::Absolute);
        assert!((abs.loss(0.2, 0.7).unwrap() - 0.5).abs() <= 1e-12);
        let sq = LossSpace::new(ValueSpace::UnitReal, LossKind::Squared);
        assert_eq!(sq.loss(0.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn values_outside_the_space_are_rejected() {
        assert!(LossSpace::binary_zero_one().loss(2.0, 0.0).is_err());
        let abs = LossSpace::new(ValueSpace::UnitReal, LossKind::Absolute);
        assert!(abs.loss(1.5, 0.0).is_err());
        let lab = LossSpace::new(ValueSpace::Labels { k: 3 }, LossKind::ZeroOne);
        assert!(lab.loss(2.0, 0.0).is_ok());
        assert!(lab.loss(3.0, 0.0).is_err());
        assert!(lab.loss(0.5, 0.0).is_err());
    }

    #[test]
    fn sup_loss_is_finite_exactly_on_bounded_ranges() {
        assert_eq!(LossSpace::binary_zero_one().sup_loss(), 1.0);
        assert_eq!(LossSpace::new(ValueSpace::Natural, LossKind::ZeroOne).sup_loss(), 1.0);
        assert!(LossSpace::new(ValueSpace::Natural, LossKind::Absolute).sup_loss().is_infinite());
        assert_eq!(LossSpace::new(ValueSpace::Labels { k: 4 }, LossKind::Absolute).sup_loss(), 3.0);
        assert_eq!(LossSpace::new(ValueSpace::Labels { k: 4 }, LossKind::Squared).sup_loss(), 9.0);
    }

    #[test]
    fn squared_loss_is_flagged_and_dominated() {
        let sq = LossSpace::new(ValueSpace::UnitReal, LossKind::Squared);
        assert!(!sq.is_metric());
        let (metric, phi) = sq.dominating_metric().unwrap();
        assert_eq!(metric.loss, LossKind::Absolute);
        assert_eq!(phi(0.5), 0.25);
        assert!(LossSpace::binary_zero_one().dominating_metric().is_none());
    }
}
