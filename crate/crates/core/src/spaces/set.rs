//! Measurable sets on the two instance spaces.
//!
//! Interval unions are kept in canonical form: sorted, pairwise disjoint,
//! non-adjacent half-open intervals `[a, b)` with rational endpoints in
//! `[0, 1]`. An interval whose right endpoint is 1 also contains the point 1,
//! so complements stay inside the closed unit interval. Subsets of the naturals
//! are finite or cofinite, stored as sorted element (or exclusion) lists.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::point::{cmp_real_rational, InstanceSpace, Point};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Rational64,
    hi: Rational64,
}

impl Interval {
    pub fn new(lo: Rational64, hi: Rational64) -> Result<Self> {
        if lo < Rational64::zero() || hi > Rational64::one() || lo >= hi {
            return Err(LabError::usage(format!("invalid interval [{lo},{hi})")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> Rational64 {
        self.lo
    }

    pub fn hi(&self) -> Rational64 {
        self.hi
    }

    fn contains_real(&self, x: f64) -> bool {
        if cmp_real_rational(x, &self.lo) == Ordering::Less {
            return false;
        }
        match cmp_real_rational(x, &self.hi) {
            Ordering::Less => true,
            Ordering::Equal => self.hi.is_one(),
            Ordering::Greater => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MeasurableSet {
    Intervals(Vec<Interval>),
    Finite(Vec<u64>),
    Cofinite(Vec<u64>),
}

impl MeasurableSet {
    pub fn empty(space: InstanceSpace) -> Self {
        match space {
            InstanceSpace::Unit => MeasurableSet::Intervals(Vec::new()),
            InstanceSpace::Nat => MeasurableSet::Finite(Vec::new()),
        }
    }

    pub fn full(space: InstanceSpace) -> Self {
        match space {
            InstanceSpace::Unit => MeasurableSet::Intervals(vec![Interval {
                lo: Rational64::zero(),
                hi: Rational64::one(),
            }]),
            InstanceSpace::Nat => MeasurableSet::Cofinite(Vec::new()),
        }
    }

    /// Union of the given intervals, canonicalized.
    pub fn from_intervals(intervals: Vec<Interval>) -> Self {
        MeasurableSet::Intervals(canonical_intervals(intervals))
    }

    /// Convenience constructor for `[lo, hi)` with `i64` ratios.
    pub fn interval(lo: (i64, i64), hi: (i64, i64)) -> Result<Self> {
        let iv = Interval::new(Rational64::new(lo.0, lo.1), Rational64::new(hi.0, hi.1))?;
        Ok(MeasurableSet::Intervals(vec![iv]))
    }

    pub fn finite(elems: impl IntoIterator<Item = u64>) -> Self {
        let mut v: Vec<u64> = elems.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        MeasurableSet::Finite(v)
    }

    pub fn cofinite(excluded: impl IntoIterator<Item = u64>) -> Self {
        let mut v: Vec<u64> = excluded.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        MeasurableSet::Cofinite(v)
    }

    pub fn space(&self) -> InstanceSpace {
        match self {
            MeasurableSet::Intervals(_) => InstanceSpace::Unit,
            _ => InstanceSpace::Nat,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            MeasurableSet::Intervals(v) => v.is_empty(),
            MeasurableSet::Finite(v) => v.is_empty(),
            MeasurableSet::Cofinite(_) => false,
        }
    }

    pub fn intervals(&self) -> Option<&[Interval]> {
        match self {
            MeasurableSet::Intervals(v) => Some(v),
            _ => None,
        }
    }

    /// Checks the canonical-form invariants.
    pub fn is_canonical(&self) -> bool {
        match self {
            MeasurableSet::Intervals(v) => {
                v.iter()
                    .all(|iv| iv.lo >= Rational64::zero() && iv.hi <= Rational64::one() && iv.lo < iv.hi)
                    && v.windows(2).all(|w| w[0].hi < w[1].lo)
            }
            MeasurableSet::Finite(v) | MeasurableSet::Cofinite(v) => v.windows(2).all(|w| w[0] < w[1]),
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.space() != other.space() {
            return Err(LabError::usage(format!(
                "set variant mismatch: {} vs {}",
                self.space(),
                other.space()
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: &Point) -> Result<bool> {
        match (self, x) {
            (MeasurableSet::Intervals(v), Point::Real(r)) => Ok(contains_sorted(v, *r)),
            (MeasurableSet::Finite(v), Point::Nat(k)) => Ok(v.binary_search(k).is_ok()),
            (MeasurableSet::Cofinite(v), Point::Nat(k)) => Ok(v.binary_search(k).is_err()),
            _ => Err(LabError::usage(format!(
                "point {x} is not in the instance space of set {self}"
            ))),
        }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(match (self, other) {
            (MeasurableSet::Intervals(a), MeasurableSet::Intervals(b)) => {
                let mut all = a.clone();
                all.extend(b.iter().cloned());
                MeasurableSet::Intervals(canonical_intervals(all))
            }
            (MeasurableSet::Finite(a), MeasurableSet::Finite(b)) => MeasurableSet::Finite(sorted_union(a, b)),
            (MeasurableSet::Finite(s), MeasurableSet::Cofinite(e))
            | (MeasurableSet::Cofinite(e), MeasurableSet::Finite(s)) => MeasurableSet::Cofinite(sorted_diff(e, s)),
            (MeasurableSet::Cofinite(a), MeasurableSet::Cofinite(b)) => {
                MeasurableSet::Cofinite(sorted_intersect(a, b))
            }
            _ => unreachable!("variant checked"),
        })
    }

    pub fn intersect(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(match (self, other) {
            (MeasurableSet::Intervals(a), MeasurableSet::Intervals(b)) => {
                MeasurableSet::Intervals(intersect_intervals(a, b))
            }
            (MeasurableSet::Finite(a), MeasurableSet::Finite(b)) => MeasurableSet::Finite(sorted_intersect(a, b)),
            (MeasurableSet::Finite(s), MeasurableSet::Cofinite(e))
            | (MeasurableSet::Cofinite(e), MeasurableSet::Finite(s)) => MeasurableSet::Finite(sorted_diff(s, e)),
            (MeasurableSet::Cofinite(a), MeasurableSet::Cofinite(b)) => MeasurableSet::Cofinite(sorted_union(a, b)),
            _ => unreachable!("variant checked"),
        })
    }

    pub fn complement(&self) -> Self {
        match self {
            MeasurableSet::Intervals(v) => {
                let mut out = Vec::new();
                let mut cursor = Rational64::zero();
                for iv in v {
                    if iv.lo > cursor {
                        out.push(Interval { lo: cursor, hi: iv.lo });
                    }
                    cursor = iv.hi;
                }
                if cursor < Rational64::one() {
                    out.push(Interval {
                        lo: cursor,
                        hi: Rational64::one(),
                    });
                }
                MeasurableSet::Intervals(out)
            }
            MeasurableSet::Finite(v) => MeasurableSet::Cofinite(v.clone()),
            MeasurableSet::Cofinite(v) => MeasurableSet::Finite(v.clone()),
        }
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.intersect(&other.complement())
    }

    pub fn is_subset_of(&self, other: &Self) -> Result<bool> {
        Ok(self.difference(other)?.is_empty())
    }

    /// Sort key used to order the cells of a canonical partition: the least
    /// element of the set (disjoint nonempty sets have distinct least elements).
    pub(crate) fn order_key(&self) -> (Rational64, u64) {
        match self {
            MeasurableSet::Intervals(v) => (v.first().map(|iv| iv.lo).unwrap_or_else(Rational64::one), 0),
            MeasurableSet::Finite(v) => (Rational64::zero(), v.first().copied().unwrap_or(u64::MAX)),
            MeasurableSet::Cofinite(e) => {
                let mut k = 0u64;
                for &x in e {
                    if x == k {
                        k += 1;
                    } else {
                        break;
                    }
                }
                (Rational64::zero(), k)
            }
        }
    }
}

fn contains_sorted(v: &[Interval], x: f64) -> bool {
    // first interval whose right end is not below x
    let idx = v.partition_point(|iv| cmp_real_rational(x, &iv.hi) == Ordering::Greater);
    v[idx.saturating_sub(1)..v.len().min(idx + 1)]
        .iter()
        .any(|iv| iv.contains_real(x))
}

fn canonical_intervals(mut v: Vec<Interval>) -> Vec<Interval> {
    v.sort_by(|a, b| a.lo.cmp(&b.lo).then(a.hi.cmp(&b.hi)));
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for iv in v {
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi => {
                if iv.hi > last.hi {
                    last.hi = iv.hi;
                }
            }
            _ => out.push(iv),
        }
    }
    out
}

fn intersect_intervals(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let lo = a[i].lo.max(b[j].lo);
        let hi = a[i].hi.min(b[j].hi);
        if lo < hi {
            out.push(Interval { lo, hi });
        }
        if a[i].hi < b[j].hi {
            i += 1;
        } else {
            j += 1;
        }
    }
    canonical_intervals(out)
}

fn sorted_union(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut v: Vec<u64> = a.iter().chain(b.iter()).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn sorted_intersect(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().copied().filter(|x| b.binary_search(x).is_ok()).collect()
}

fn sorted_diff(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().copied().filter(|x| b.binary_search(x).is_err()).collect()
}

fn fmt_rational(r: &Rational64) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for MeasurableSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasurableSet::Intervals(v) if v.is_empty() => write!(f, "empty"),
            MeasurableSet::Intervals(v) => {
                for (k, iv) in v.iter().enumerate() {
                    if k > 0 {
                        write!(f, "+")?;
                    }
                    let close = if iv.hi.is_one() { ']' } else { ')' };
                    write!(f, "[{},{}{}", fmt_rational(&iv.lo), fmt_rational(&iv.hi), close)?;
                }
                Ok(())
            }
            MeasurableSet::Finite(v) => write!(f, "{{{}}}", join(v)),
            MeasurableSet::Cofinite(v) => write!(f, "~{{{}}}", join(v)),
        }
    }
}

fn join(v: &[u64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Parses a rational literal: `3/4`, `0.25`, or `1`.
pub fn parse_rational(s: &str) -> Result<Rational64> {
    let s = s.trim();
    let bad = || LabError::Parse(format!("bad rational `{s}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.len() > 17 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| bad())? };
        let den = 10i64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
        let num: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        return Ok(Rational64::new(whole * den + num, den));
    }
    Ok(Rational64::from_integer(s.parse().map_err(|_| bad())?))
}

impl FromStr for MeasurableSet {
    type Err = LabError;

    /// Literal syntax: `[0,1/4)+[1/2,3/4)` for interval unions (a closing `]`
    /// is accepted for intervals ending at 1), `{1,4,9}` for finite subsets of
    /// the naturals, `~{1,4}` for their complements, `empty` for the empty
    /// interval union.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "empty" {
            return Ok(MeasurableSet::Intervals(Vec::new()));
        }
        let nat_list = |body: &str| -> Result<Vec<u64>> {
            let inner = body
                .strip_prefix('{')
                .and_then(|b| b.strip_suffix('}'))
                .ok_or_else(|| LabError::Parse(format!("bad set literal `{s}`")))?;
            inner
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<u64>().map_err(|_| LabError::Parse(format!("bad natural `{t}`"))))
                .collect()
        };
        if let Some(rest) = s.strip_prefix('~') {
            return Ok(MeasurableSet::cofinite(nat_list(rest.trim())?));
        }
        if s.starts_with('{') {
            return Ok(MeasurableSet::finite(nat_list(s)?));
        }
        let mut ivs = Vec::new();
        for part in s.split('+') {
            let part = part.trim();
            let body = part
                .strip_prefix('[')
                .ok_or_else(|| LabError::Parse(format!("bad interval `{part}`")))?;
            let (body, closed) = if let Some(b) = body.strip_suffix(')') {
                (b, false)
            } else if let Some(b) = body.strip_suffix(']') {
                (b, true)
            } else {
                return Err(LabError::Parse(format!("bad interval `{part}`")));
            };
            let (lo, hi) = body
                .split_once(',')
                .ok_or_else(|| LabError::Parse(format!("bad interval `{part}`")))?;
            let (lo, hi) = (parse_rational(lo)?, parse_rational(hi)?);
            if closed && !hi.is_one() {
                return Err(LabError::Parse(format!(
                    "closed right end only allowed at 1 in `{part}`"
                )));
            }
            ivs.push(Interval::new(lo, hi).map_err(|e| LabError::Parse(e.to_string()))?);
        }
        Ok(MeasurableSet::from_intervals(ivs))
    }
}

impl Serialize for MeasurableSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for MeasurableSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(s: &str) -> MeasurableSet {
        s.parse().unwrap()
    }

    #[test]
    fn contains_uses_half_open_boundaries() {
        let a = set("[0,1/2)");
        assert!(!a.contains(&Point::Real(0.5)).unwrap());
        assert!(a.contains(&Point::Real(0.0)).unwrap());
        let b = set("[0,1/2)+[3/4,1)");
        assert!(b.contains(&Point::Real(0.8)).unwrap());
        assert!(!b.contains(&Point::Real(0.6)).unwrap());
        // right endpoint 1 is closed
        assert!(b.contains(&Point::Real(1.0)).unwrap());
        assert!(set("{2,5}").contains(&Point::Nat(5)).unwrap());
        assert!(!set("{2,5}").contains(&Point::Nat(4)).unwrap());
    }

    #[test]
    fn mismatched_variants_are_usage_errors() {
        assert!(matches!(set("{1}").contains(&Point::Real(0.1)), Err(LabError::Usage(_))));
        assert!(set("{1}").union(&set("[0,1)")).is_err());
    }

    #[test]
    fn union_merges_adjacent_intervals() {
        let u = set("[0,1/4)+[1/2,3/4)").union(&set("[1/4,1/2)")).unwrap();
        assert_eq!(u, set("[0,3/4)"));
        assert_eq!(u.to_string(), "[0,3/4)");
    }

    #[test]
    fn complement_closes_at_one() {
        let c = set("[0,1/2)").complement();
        assert_eq!(c.to_string(), "[1/2,1]");
        assert_eq!(c.complement(), set("[0,1/2)"));
    }

    #[test]
    fn intersect_with_complement_is_empty() {
        for lit in ["[0,1/3)+[1/2,2/3)", "{1,4,9}", "~{0,2}", "empty"] {
            let a = set(lit);
            assert!(a.intersect(&a.complement()).unwrap().is_empty(), "{lit}");
        }
    }

    #[test]
    fn nat_algebra_mixes_finite_and_cofinite() {
        let f = set("{1,2,3}");
        let c = set("~{2,7}");
        assert_eq!(f.union(&c).unwrap(), set("~{7}"));
        assert_eq!(f.intersect(&c).unwrap(), set("{1,3}"));
        assert_eq!(c.union(&set("~{7,9}")).unwrap(), set("~{7}"));
    }

    #[test]
    fn literals_round_trip() {
        for lit in ["[0,1/4)+[1/2,3/4)", "[1/3,1]", "{1,4,9}", "~{0}", "{}", "empty"] {
            assert_eq!(set(lit).to_string(), lit);
        }
        assert_eq!(set("[0.25,0.5)"), set("[1/4,1/2)"));
    }

    #[test]
    fn bad_literals_are_rejected() {
        for lit in ["[0,1/2", "[1/2,1/4)", "[0,1/2]", "{a}", "[0,2)"] {
            assert!(lit.parse::<MeasurableSet>().is_err(), "{lit}");
        }
    }
}
