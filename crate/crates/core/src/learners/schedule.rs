//! Index schedules for the learning rules.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::spaces::LossSpace;

/// A positive-integer sequence indexed from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Growth {
    /// `i`
    Identity,
    /// `2^(i-1)`
    Pow2,
    /// `ceil(log2(i + 1))`
    Log2,
    /// `ceil(sqrt(i))`
    Sqrt,
    /// `slope * i`
    Linear { slope: u64 },
    /// A fixed value. Only sensible for horizons that are bounded anyway.
    Constant { value: u64 },
}

impl Growth {
    pub fn at(&self, i: u64) -> u64 {
        match *self {
            Growth::Identity => i,
            Growth::Pow2 => 1u64.checked_shl((i.max(1) - 1) as u32).unwrap_or(u64::MAX),
            Growth::Log2 => u64::from(64 - i.leading_zeros()),
            Growth::Sqrt => {
                let r = i.isqrt();
                if r * r < i {
                    r + 1
                } else {
                    r
                }
            }
            Growth::Linear { slope } => slope.saturating_mul(i),
            Growth::Constant { value } => value,
        }
    }

    fn validate(&self, key: &str) -> Result<()> {
        match *self {
            Growth::Linear { slope: 0 } | Growth::Constant { value: 0 } => {
                Err(LabError::config(key, "sequence values must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// `gamma_i = scale * lbar * ratio^(i-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gamma {
    #[serde(default = "half")]
    pub ratio: f64,
    #[serde(default = "unit")]
    pub scale: f64,
}

impl Default for Gamma {
    fn default() -> Self {
        Gamma { ratio: 0.5, scale: 1.0 }
    }
}

impl Gamma {
    pub fn at(&self, i: u64, lbar: f64) -> f64 {
        self.scale * lbar * self.ratio.powi((i - 1).min(i32::MAX as u64) as i32)
    }
}

/// Slack of the approximate argmin at sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Epsilon {
    /// `scale / n`
    Inverse {
        #[serde(default = "unit")]
        scale: f64,
    },
    Constant { value: f64 },
}

impl Default for Epsilon {
    fn default() -> Self {
        Epsilon::Inverse { scale: 1.0 }
    }
}

impl Epsilon {
    pub fn at(&self, n: u64) -> f64 {
        match *self {
            Epsilon::Inverse { scale } => scale / n.max(1) as f64,
            Epsilon::Constant { value } => value,
        }
    }
}

fn half() -> f64 {
    0.5
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    #[serde(default = "ident")]
    pub u: Growth,
    #[serde(default)]
    pub gamma: Gamma,
    #[serde(default)]
    pub epsilon: Epsilon,
    #[serde(default = "sqrt")]
    pub m_hat: Growth,
    #[serde(default = "log2")]
    pub i_n: Growth,
    #[serde(default = "log2")]
    pub k_n: Growth,
}

fn ident() -> Growth {
    Growth::Identity
}

fn sqrt() -> Growth {
    Growth::Sqrt
}

fn log2() -> Growth {
    Growth::Log2
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            u: Growth::Identity,
            gamma: Gamma::default(),
            epsilon: Epsilon::default(),
            m_hat: Growth::Sqrt,
            i_n: Growth::Log2,
            k_n: Growth::Log2,
        }
    }
}

/// Largest stage index the self-adaptive search will scan.
pub const MAX_STAGE: u64 = 1 << 20;

impl ScheduleParams {
    /// Checks the constraints that can be verified up front. `u_1 = 1` and
    /// `gamma_1 >= lbar` guarantee the self-adaptive index is at least 1.
    pub fn validate(&self, loss: &LossSpace) -> Result<()> {
        if self.u.at(1) != 1 {
            return Err(LabError::config("learner.schedule.u", "u_1 must equal 1"));
        }
        if matches!(self.u, Growth::Constant { .. }) {
            return Err(LabError::config("learner.schedule.u", "u_i must grow without bound"));
        }
        let g = self.gamma;
        if !(g.ratio > 0.0 && g.ratio < 1.0) {
            return Err(LabError::config("learner.schedule.gamma.ratio", "must lie in (0,1)"));
        }
        let lbar = loss.sup_loss();
        if lbar.is_finite() && g.at(1, lbar).partial_cmp(&lbar).is_none_or(|o| o.is_lt()) {
            return Err(LabError::config(
                "learner.schedule.gamma.scale",
                format!("gamma_1 = {} is below the loss bound {lbar}", g.at(1, lbar)),
            ));
        }
        let eps_ok = match self.epsilon {
            Epsilon::Inverse { scale } => scale >= 0.0 && scale.is_finite(),
            Epsilon::Constant { value } => value >= 0.0 && value.is_finite(),
        };
        if !eps_ok {
            return Err(LabError::config("learner.schedule.epsilon", "must be finite and nonnegative"));
        }
        self.m_hat.validate("learner.schedule.m_hat")?;
        self.i_n.validate("learner.schedule.i_n")?;
        self.k_n.validate("learner.schedule.k_n")?;
        Ok(())
    }

    /// Checks only the sequences used by the stability-chain rule.
    pub fn validate_chain(&self) -> Result<()> {
        self.i_n.validate("learner.schedule.i_n")?;
        self.k_n.validate("learner.schedule.k_n")
    }

    /// `max { i : u_i <= n }`, at least 1.
    pub fn top_stage(&self, n: u64) -> Result<u64> {
        if n == 0 {
            return Ok(1);
        }
        // u is nondecreasing: gallop, then bisect
        let mut hi = 1u64;
        while self.u.at(hi) <= n {
            if hi >= MAX_STAGE {
                return Err(LabError::Resource(format!(
                    "more than {MAX_STAGE} stages satisfy u_i <= {n}"
                )));
            }
            hi *= 2;
        }
        let mut lo = hi / 2;
        // invariant: u(lo) <= n (or lo = 0), u(hi) > n
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.u.at(mid) <= n {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo.max(1))
    }

    /// `epsilon_k = 2^-k` with `epsilon_0 = +inf`.
    pub fn chain_epsilon(k: u64) -> f64 {
        if k == 0 {
            f64::INFINITY
        } else {
            0.5f64.powi(k.min(2000) as i32)
        }
    }
}
