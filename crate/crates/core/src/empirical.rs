//! Prefix-average statistics: the empirical risks inside the learning rules
//! and the finite-horizon proxy for the limsup frequency of a set.

use crate::error::{LabError, Result};
use crate::spaces::{LossSpace, MeasurableSet, Point, SimpleFunction};

/// Cumulative sums of a nonnegative loss sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrefixLossSeries {
    cum: Vec<f64>,
}

impl PrefixLossSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_losses(losses: impl IntoIterator<Item = f64>) -> Self {
        let mut s = Self::new();
        for l in losses {
            s.push(l);
        }
        s
    }

    pub fn push(&mut self, loss: f64) {
        debug_assert!(loss >= 0.0, "losses are nonnegative");
        let last = self.cum.last().copied().unwrap_or(0.0);
        self.cum.push(last + loss);
    }

    pub fn len(&self) -> usize {
        self.cum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cum.is_empty()
    }

    /// Sum of the first `m` losses.
    pub fn sum(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.cum[m - 1]
        }
    }

    /// Average of the first `m` losses, `m >= 1`.
    pub fn average(&self, m: usize) -> f64 {
        self.sum(m) / m as f64
    }

    /// `max_{m0 <= m <= n} sum(m) / m`.
    pub fn prefix_max_risk(&self, m0: usize, n: usize) -> Result<f64> {
        if m0 == 0 || m0 > n {
            return Err(LabError::usage(format!("need 1 <= m0 <= n, got m0={m0}, n={n}")));
        }
        if n > self.len() {
            return Err(LabError::usage(format!("n={n} beyond series length {}", self.len())));
        }
        Ok((m0..=n).map(|m| self.average(m)).fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Free-function form of [`PrefixLossSeries::prefix_max_risk`].
pub fn prefix_max_risk(series: &PrefixLossSeries, m0: usize, n: usize) -> Result<f64> {
    series.prefix_max_risk(m0, n)
}

/// Default start of the limsup window for a horizon `t`: `ceil(t / 4)`.
pub fn default_tail_start(t: usize) -> usize {
    t.div_ceil(4).max(1)
}

/// Finite-horizon proxy for the limsup relative frequency of `a`: the largest
/// prefix frequency `|X_{1:m} ∩ A| / m` over `m` in `[tail_start, T]`.
pub fn mu_hat_estimate(a: &MeasurableSet, sample: &[Point], tail_start: usize) -> Result<f64> {
    if sample.is_empty() {
        return Err(LabError::usage("mu_hat_estimate needs a nonempty sample"));
    }
    let hits = sample
        .iter()
        .map(|x| a.contains(x).map(|b| if b { 1.0 } else { 0.0 }))
        .collect::<Result<Vec<f64>>>()?;
    limsup_proxy(&hits, tail_start)
}

/// Largest prefix average of `values` over prefix lengths in
/// `[tail_start, len]`.
pub fn limsup_proxy(values: &[f64], tail_start: usize) -> Result<f64> {
    let t = values.len();
    if t == 0 {
        return Err(LabError::usage("empty sequence"));
    }
    if tail_start == 0 || tail_start > t {
        return Err(LabError::usage(format!(
            "tail_start {tail_start} outside 1..={t}"
        )));
    }
    let mut sum = 0.0;
    let mut best = f64::NEG_INFINITY;
    for (m, v) in values.iter().enumerate() {
        sum += v;
        if m + 1 >= tail_start {
            best = best.max(sum / (m + 1) as f64);
        }
    }
    Ok(best)
}

/// Increase of the prefix-max pairwise loss when the horizon grows from `n` to
/// `m`, both maxima taken over prefix lengths starting at `u`.
#[allow(clippy::too_many_arguments)]
pub fn stability_gap(
    f: &SimpleFunction,
    g: &SimpleFunction,
    sample: &[Point],
    u: usize,
    n: usize,
    m: usize,
    space: &LossSpace,
) -> Result<f64> {
    if u == 0 || u > n || n > m || m > sample.len() {
        return Err(LabError::usage(format!(
            "need 1 <= u <= n <= m <= len, got u={u}, n={n}, m={m}, len={}",
            sample.len()
        )));
    }
    let mut series = PrefixLossSeries::new();
    for x in &sample[..m] {
        series.push(space.eval(f.eval(x)?, g.eval(x)?));
    }
    Ok(series.prefix_max_risk(u, m)? - series.prefix_max_risk(u, n)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::InstanceSpace;

    #[test]
    fn prefix_max_examples() {
        let c = PrefixLossSeries::from_losses([0.25; 6]);
        for m0 in 1..=6 {
            assert_eq!(c.prefix_max_risk(m0, 6).unwrap(), 0.25);
        }
        let s = PrefixLossSeries::from_losses([1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.prefix_max_risk(1, 4).unwrap(), 1.0);
        assert_eq!(s.prefix_max_risk(2, 4).unwrap(), 0.5);
        assert!(s.prefix_max_risk(3, 2).is_err());
        assert!(s.prefix_max_risk(0, 2).is_err());
    }

    #[test]
    fn mu_hat_examples() {
        let a: MeasurableSet = "{1}".parse().unwrap();
        let all = vec![Point::Nat(1); 5];
        assert_eq!(mu_hat_estimate(&a, &all, 1).unwrap(), 1.0);
        let alt = [1, 0, 1, 0].map(Point::Nat);
        assert_eq!(mu_hat_estimate(&a, &alt, 2).unwrap(), 2.0 / 3.0);
        let empty = MeasurableSet::empty(InstanceSpace::Nat);
        assert_eq!(mu_hat_estimate(&empty, &alt, 1).unwrap(), 0.0);
        assert!(mu_hat_estimate(&a, &[], 1).is_err());
    }

    #[test]
    fn stability_gap_examples() {
        let zo = LossSpace::binary_zero_one();
        let f = SimpleFunction::constant(InstanceSpace::Nat, 0.0);
        let g = SimpleFunction::new(InstanceSpace::Nat, vec![("{3,4}".parse().unwrap(), 1.0)], 0.0).unwrap();
        let xs = [1, 2, 3, 4].map(Point::Nat);
        assert_eq!(stability_gap(&f, &g, &xs, 1, 2, 4, &zo).unwrap(), 0.5);
        assert_eq!(stability_gap(&f, &g, &xs, 1, 3, 3, &zo).unwrap(), 0.0);
        assert_eq!(stability_gap(&g, &g, &xs, 1, 2, 4, &zo).unwrap(), 0.0);
        assert!(stability_gap(&f, &g, &xs, 1, 3, 2, &zo).is_err());
    }
}
