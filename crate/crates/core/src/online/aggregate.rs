//! Exponential weights over a finite expert bank.

use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::spaces::{LossSpace, Value, ValueSpace};

/// `p_i = 6 / (pi^2 i^2)` for `i = 1..=count`, renormalized to sum to 1.
pub fn truncated_prior(count: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=count).map(|i| 6.0 / (PI * PI * (i * i) as f64)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// `ln(1/b)/(1-b) * avg_loss + ln(1/p)/((1-b) n)`.
pub fn regret_bound(b: f64, p: f64, avg_loss: f64, n: u64) -> f64 {
    (1.0 / b).ln() / (1.0 - b) * avg_loss + (1.0 / p).ln() / ((1.0 - b) * n as f64)
}

/// Prior, temperature and cumulative normalized losses.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorState {
    b: f64,
    prior: Vec<f64>,
    log_prior: Vec<f64>,
    /// Sum of normalized losses per expert over the steps so far.
    cum: Vec<f64>,
    steps: u64,
}

impl AggregatorState {
    pub fn new(b: f64, experts: usize) -> Result<Self> {
        Self::with_prior(b, truncated_prior(experts))
    }

    pub fn with_prior(b: f64, prior: Vec<f64>) -> Result<Self> {
        if !(b > 0.0 && b < 1.0) {
            return Err(LabError::config("online.b", format!("{b} outside (0,1)")));
        }
        if prior.is_empty() {
            return Err(LabError::config("online.i_max", "need at least one expert"));
        }
        if prior.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(LabError::config("online.prior", "prior weights must lie in (0,1]"));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::config("online.prior", format!("prior sums to {total}")));
        }
        Ok(AggregatorState {
            b,
            log_prior: prior.iter().map(|p| p.ln()).collect(),
            cum: vec![0.0; prior.len()],
            prior,
            steps: 0,
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn experts(&self) -> usize {
        self.prior.len()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Average normalized loss of expert `i` so far.
    pub fn average_loss(&self, i: usize) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.cum[i] / self.steps as f64
        }
    }

    /// Normalized weights `v_i = p_i b^{cum_i} / sum_j p_j b^{cum_j}`, in log space.
    pub fn weights(&self) -> Result<Vec<f64>> {
        let lb = self.b.ln();
        let logs: Vec<f64> = self.log_prior.iter().zip(&self.cum).map(|(lp, c)| lp + c * lb).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(LabError::Numeric(format!("all expert weights vanished after {} steps", self.steps)));
        }
        let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(LabError::Numeric(format!("weight normalizer {total} after {} steps", self.steps)));
        }
        Ok(raw.into_iter().map(|w| w / total).collect())
    }

    /// Records one round of normalized losses, each in `[0,1]`.
    pub fn update(&mut self, losses: &[f64]) -> Result<()> {
        if losses.len() != self.cum.len() {
            return Err(LabError::usage(format!(
                "{} losses for {} experts",
                losses.len(),
                self.cum.len()
            )));
        }
        if let Some(bad) = losses.iter().find(|z| !(0.0..=1.0).contains(*z)) {
            return Err(LabError::Numeric(format!("normalized loss {bad} outside [0,1]")));
        }
        self.cum.iter_mut().zip(losses).for_each(|(c, z)| *c += z);
        self.steps += 1;
        Ok(())
    }

    /// Regret bound of expert `i` at the current step count.
    pub fn bound(&self, i: usize) -> f64 {
        regret_bound(self.b, self.prior[i], self.average_loss(i), self.steps.max(1))
    }

    /// `min_i bound(i)`.
    pub fn best_bound(&self) -> f64 {
        (0..self.experts()).map(|i| self.bound(i)).fold(f64::INFINITY, f64::min)
    }
}

/// `aggregate_weights`.
pub fn aggregate_weights(state: &AggregatorState) -> Result<Vec<f64>> {
    state.weights()
}

/// Resolution of the candidate grid for real-valued predictions.
pub const CANDIDATE_LEVEL: u32 = 10;

/// Candidate predictions in scan order.
pub fn candidates(space: &LossSpace, preds: &[Value]) -> Vec<Value> {
    match space.values {
        ValueSpace::Binary | ValueSpace::Labels { .. } => space.finite_values().unwrap_or_default(),
        ValueSpace::Natural => preds.to_vec(),
        ValueSpace::UnitReal => {
            let den = (1u32 << CANDIDATE_LEVEL) as f64;
            (0..=1u32 << CANDIDATE_LEVEL)
                .map(|j| j as f64 / den)
                .chain(preds.iter().copied())
                .collect()
        }
    }
}

/// First candidate whose weighted loss against the expert predictions is
/// within `eps` of the smallest one.
pub fn aggregate_predict(weights: &[f64], preds: &[Value], space: &LossSpace, eps: f64) -> Value {
    let cands = candidates(space, preds);
    let objective = |y: Value| -> f64 { weights.iter().zip(preds).map(|(v, &p)| v * space.eval(y, p)).sum() };
    let scores: Vec<f64> = cands.iter().map(|&y| objective(y)).collect();
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let k = scores.iter().position(|&s| s <= min + eps).unwrap_or(0);
    cands[k]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::LossKind;

    #[test]
    fn first_update_example() {
        let mut s = AggregatorState::with_prior(0.5, vec![0.5, 0.5]).unwrap();
        assert_eq!(s.weights().unwrap(), vec![0.5, 0.5]);
        s.update(&[0.0, 1.0]).unwrap();
        let v = s.weights().unwrap();
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-15 && (v[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn equal_losses_keep_the_prior() {
        let mut s = AggregatorState::new(0.3, 5).unwrap();
        for _ in 0..50 {
            s.update(&[0.7; 5]).unwrap();
        }
        for (v, p) in s.weights().unwrap().iter().zip(s.prior()) {
            assert!((v - p).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_examples() {
        assert!((regret_bound(0.5, 0.5, 0.0, 1) - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!(regret_bound(0.5, 0.5, 0.0, 1_000_000) < 1e-5);
        let mut last = f64::INFINITY;
        for n in 1..100 {
            let b = regret_bound(0.9, 0.1, 0.2, n);
            assert!(b <= last);
            last = b;
        }
    }

    #[test]
    fn prediction_examples() {
        let zo = LossSpace::new(ValueSpace::Labels { k: 3 }, LossKind::ZeroOne);
        assert_eq!(aggregate_predict(&[0.5, 0.5], &[2.0, 2.0], &zo, 0.0), 2.0);
        assert_eq!(aggregate_predict(&[0.9, 0.1], &[1.0, 2.0], &zo, 0.0), 1.0);
        let abs = LossSpace::new(ValueSpace::UnitReal, LossKind::Absolute);
        assert_eq!(aggregate_predict(&[0.5, 0.5], &[0.0, 1.0], &abs, 0.0), 0.0);
        assert_eq!(aggregate_predict(&[0.5, 0.5], &[0.3, 0.3], &abs, 0.0), 0.3);
    }

    #[test]
    fn invalid_parameters() {
        assert!(AggregatorState::new(1.0, 3).is_err());
        assert!(AggregatorState::new(0.5, 0).is_err());
        let mut s = AggregatorState::new(0.5, 2).unwrap();
        assert!(matches!(s.update(&[0.5, 1.5]), Err(LabError::Numeric(_))));
    }
}
