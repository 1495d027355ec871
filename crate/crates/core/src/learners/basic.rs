//! Nearest neighbor, memorization and prefix-max ERM.

use rustc_hash::FxHashMap;

use crate::classes::{ClassSchedule, FunctionClass};
use crate::empirical::PrefixLossSeries;
use crate::error::{LabError, Result};
use crate::spaces::{LossSpace, Point, PointKey, SimpleFunction, Value};

use super::schedule::ScheduleParams;
use super::{check_sample, InductiveRule};

/// Label of the nearest training point, ties to the smallest index.
pub fn nn_predict(data: &[(f64, Value)], x: f64) -> Result<Value> {
    let mut best: Option<(f64, Value)> = None;
    for &(xi, yi) in data {
        let d = (x - xi).abs();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, yi));
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| LabError::usage("nearest neighbor needs at least one training point"))
}

/// Nearest-neighbor rule over a sorted copy of the training points.
#[derive(Debug, Clone, Default)]
pub struct NearestNeighbor {
    /// `(x, first index with this x, label)`, sorted by `x`.
    sorted: Vec<(f64, usize, Value)>,
}

impl NearestNeighbor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Smallest index among the points on one side whose distance equals the
    /// nearest distance on that side.
    fn side_best(&self, x: f64, range: impl Iterator<Item = usize>) -> Option<(f64, usize, Value)> {
        let mut best: Option<(f64, usize, Value)> = None;
        for k in range {
            let (xi, idx, y) = self.sorted[k];
            let d = (x - xi).abs();
            match best {
                None => best = Some((d, idx, y)),
                Some((bd, bi, _)) if d == bd => {
                    if idx < bi {
                        best = Some((d, idx, y));
                    }
                }
                Some(_) => break,
            }
        }
        best
    }
}

impl InductiveRule for NearestNeighbor {
    fn name(&self) -> &'static str {
        "nn"
    }

    fn fit(&mut self, xs: &[Point], ys: &[Value]) -> Result<()> {
        check_sample(xs, ys)?;
        let mut pts = Vec::with_capacity(xs.len());
        for (i, (x, &y)) in xs.iter().zip(ys).enumerate() {
            let v = x
                .as_real()
                .ok_or_else(|| LabError::usage("nearest neighbor runs on the unit interval"))?;
            pts.push((v, i, y));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        pts.dedup_by(|later, first| later.0 == first.0);
        self.sorted = pts;
        Ok(())
    }

    fn predict(&self, x: &Point) -> Result<Value> {
        if self.sorted.is_empty() {
            return Err(LabError::usage("nearest neighbor needs at least one training point"));
        }
        let v = x
            .as_real()
            .ok_or_else(|| LabError::usage("nearest neighbor runs on the unit interval"))?;
        let pos = self.sorted.partition_point(|p| p.0 <= v);
        let left = self.side_best(v, (0..pos).rev());
        let right = self.side_best(v, pos..self.sorted.len());
        let pick = match (left, right) {
            (Some(l), Some(r)) => {
                if l.0 < r.0 || (l.0 == r.0 && l.1 < r.1) {
                    l
                } else {
                    r
                }
            }
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => unreachable!(),
        };
        Ok(pick.2)
    }
}

/// `y_i` for the smallest `i` with `x_i = x`, else `default`.
pub fn memorize_predict(data: &[(Point, Value)], x: &Point, default: Value) -> Value {
    let key = x.key();
    data.iter()
        .find(|(xi, _)| xi.key() == key)
        .map_or(default, |d| d.1)
}

#[derive(Debug, Clone, Default)]
pub struct Memorize {
    seen: FxHashMap<PointKey, Value>,
    default: Value,
}

impl Memorize {
    pub fn new(default: Value) -> Self {
        Memorize {
            seen: FxHashMap::default(),
            default,
        }
    }
}

impl InductiveRule for Memorize {
    fn name(&self) -> &'static str {
        "memorize"
    }

    fn fit(&mut self, xs: &[Point], ys: &[Value]) -> Result<()> {
        check_sample(xs, ys)?;
        self.seen.clear();
        for (x, &y) in xs.iter().zip(ys) {
            self.seen.entry(x.key()).or_insert(y);
        }
        Ok(())
    }

    fn predict(&self, x: &Point) -> Result<Value> {
        Ok(self.seen.get(&x.key()).copied().unwrap_or(self.default))
    }
}

/// Index of the first risk within `eps` of the minimum.
pub(crate) fn first_within(risks: &[f64], eps: f64) -> usize {
    let min = risks.iter().copied().fold(f64::INFINITY, f64::min);
    risks.iter().position(|&r| r <= min + eps).unwrap_or(0)
}

/// Prefix-max risk `max_{m0 <= m <= n} (1/m) sum_{t<=m} loss(f(x_t), y_t)`.
fn prefix_max_of(f: impl Fn(&Point) -> Result<Value>, xs: &[Point], ys: &[Value], m0: usize, space: &LossSpace) -> Result<f64> {
    let mut series = PrefixLossSeries::new();
    for (x, &y) in xs.iter().zip(ys) {
        series.push(space.eval(f(x)?, y));
    }
    series.prefix_max_risk(m0, xs.len())
}

/// The first function in `class` whose prefix-max risk over `[m_hat, n]` is
/// within `eps` of the class minimum.
pub fn erm_select<'a>(
    class: &'a [SimpleFunction],
    xs: &[Point],
    ys: &[Value],
    m_hat: usize,
    eps: f64,
    space: &LossSpace,
) -> Result<&'a SimpleFunction> {
    if class.is_empty() {
        return Err(LabError::usage("erm over an empty class"));
    }
    check_sample(xs, ys)?;
    let risks = class
        .iter()
        .map(|f| prefix_max_of(|x| f.eval(x), xs, ys, m_hat, space))
        .collect::<Result<Vec<_>>>()?;
    Ok(&class[first_within(&risks, eps)])
}

/// Prefix-max risks of the first `count` rows of a materialized class.
pub(crate) fn class_prefix_max(
    class: &FunctionClass,
    count: usize,
    xs: &[Point],
    ys: &[Value],
    m0: usize,
    space: &LossSpace,
) -> Vec<f64> {
    let idx = class.indexer();
    let cells: Vec<usize> = xs.iter().map(|x| idx.cell_of(x)).collect();
    (0..count)
        .map(|j| {
            let row = class.row(j);
            let mut sum = 0.0;
            let mut best = f64::NEG_INFINITY;
            for (s, (&c, &y)) in cells.iter().zip(ys).enumerate() {
                sum += space.eval(row[c], y);
                if s + 1 >= m0 {
                    best = best.max(sum / (s + 1) as f64);
                }
            }
            best
        })
        .collect()
}

/// Constrained prefix-max ERM over `F_{i_n}` with window start `m_hat_n`.
#[derive(Debug, Clone)]
pub struct PrefixMaxErm {
    schedule: ScheduleParams,
    classes: ClassSchedule,
    space: LossSpace,
    class: Option<FunctionClass>,
    chosen: usize,
}

impl PrefixMaxErm {
    pub fn new(schedule: ScheduleParams, classes: ClassSchedule, space: LossSpace) -> Result<Self> {
        schedule.validate(&space)?;
        Ok(PrefixMaxErm {
            schedule,
            classes,
            space,
            class: None,
            chosen: 0,
        })
    }

    /// Index of the selected member within the enumeration.
    pub fn chosen(&self) -> usize {
        self.chosen
    }
}

impl InductiveRule for PrefixMaxErm {
    fn name(&self) -> &'static str {
        "erm"
    }

    fn fit(&mut self, xs: &[Point], ys: &[Value]) -> Result<()> {
        check_sample(xs, ys)?;
        let n = xs.len() as u64;
        let size = self.classes.size(self.schedule.i_n.at(n.max(1)) as usize)?;
        if self.class.as_ref().is_none_or(|c| c.len() < size) {
            self.class = Some(self.classes.class(self.schedule.i_n.at(n.max(1)) as usize)?);
        }
        let class = self.class.as_ref().unwrap();
        if n == 0 {
            self.chosen = 0;
            return Ok(());
        }
        let m0 = (self.schedule.m_hat.at(n) as usize).clamp(1, xs.len());
        let risks = class_prefix_max(class, size, xs, ys, m0, &self.space);
        self.chosen = first_within(&risks, self.schedule.epsilon.at(n));
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::InstanceSpace;

    #[test]
    fn nn_examples() {
        assert_eq!(nn_predict(&[(0.1, 0.0), (0.9, 1.0)], 0.2).unwrap(), 0.0);
        assert_eq!(nn_predict(&[(0.25, 1.0), (0.75, 0.0)], 0.5).unwrap(), 1.0);
        assert_eq!(nn_predict(&[(0.75, 0.0), (0.25, 1.0)], 0.5).unwrap(), 0.0);
        assert_eq!(nn_predict(&[(0.3, 2.0)], 0.99).unwrap(), 2.0);
        assert!(nn_predict(&[], 0.5).is_err());
    }

    #[test]
    fn sorted_nn_matches_scan() {
        let xs = [0.5, 0.25, 0.75, 0.25, 0.0, 1.0, 0.625];
        let data: Vec<(f64, Value)> = xs.iter().enumerate().map(|(i, &x)| (x, i as f64)).collect();
        let mut rule = NearestNeighbor::new();
        let pts: Vec<Point> = xs.iter().map(|&x| Point::Real(x)).collect();
        let ys: Vec<Value> = data.iter().map(|d| d.1).collect();
        rule.fit(&pts, &ys).unwrap();
        for k in 0..=64 {
            let q = k as f64 / 64.0;
            assert_eq!(rule.predict(&Point::Real(q)).unwrap(), nn_predict(&data, q).unwrap(), "{q}");
        }
    }

    #[test]
    fn memorize_examples() {
        let a = Point::Nat(3);
        let b = Point::Nat(4);
        assert_eq!(memorize_predict(&[(a, 1.0), (b, 0.0)], &a, 9.0), 1.0);
        assert_eq!(memorize_predict(&[(a, 1.0)], &Point::Nat(7), 9.0), 9.0);
        assert_eq!(memorize_predict(&[(a, 1.0), (a, 0.0)], &a, 9.0), 1.0);
    }

    #[test]
    fn erm_examples() {
        let zero = SimpleFunction::constant(InstanceSpace::Unit, 0.0);
        let one = SimpleFunction::constant(InstanceSpace::Unit, 1.0);
        let class = vec![zero.clone(), one.clone()];
        let loss = LossSpace::binary_zero_one();
        let xs = [Point::Real(0.1), Point::Real(0.2)];
        assert_eq!(erm_select(&class, &xs, &[1.0, 1.0], 1, 0.0, &loss).unwrap(), &one);
        assert_eq!(erm_select(&class, &xs, &[1.0, 0.0], 1, 0.0, &loss).unwrap(), &one);
        assert_eq!(erm_select(&class, &xs, &[1.0, 0.0], 1, 1.0, &loss).unwrap(), &zero);
        assert!(erm_select(&[], &xs, &[1.0, 0.0], 1, 0.0, &loss).is_err());
    }
}
