//! Finite-horizon evidence for conditions 1, 2, 3 and convergent relative
//! frequencies.
//!
//! Every output is a curve or a bracket. None of them is a membership test,
//! and every record says so.

use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::empirical::default_tail_start;
use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::processes::{make_process, ProcessSpec};
use crate::spaces::{MeasurableSet, Point, PointKey};

/// Attached verbatim to every diagnostic record.
pub const CAVEAT: &str =
    "finite-horizon evidence; no consistent test exists (Theorem: no consistent hypothesis test for SUIL)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    C1,
    C2,
    C3,
    Crf,
}

impl FromStr for Condition {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c1" | "1" => Ok(Condition::C1),
            "c2" | "2" => Ok(Condition::C2),
            "c3" | "3" => Ok(Condition::C3),
            "crf" => Ok(Condition::Crf),
            _ => Err(LabError::usage(format!("unknown condition {s:?}; expected c1, c2, c3 or crf"))),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::C1 => "c1",
            Condition::C2 => "c2",
            Condition::C3 => "c3",
            Condition::Crf => "crf",
        })
    }
}

/// A countable family of sets `A_1, A_2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetFamily {
    /// Every point is its own cell (disjoint).
    Singletons,
    /// Explicit sets, in order.
    Explicit { sets: Vec<MeasurableSet> },
    /// `A_k = {k, k+1, ...}` on the naturals, `k = 1..=count` (decreasing).
    Tails { count: u32 },
    /// `A_k = [0, 2^-k)` on the unit interval, `k = 1..=count` (decreasing).
    DyadicHeads { count: u32 },
}

impl FromStr for SetFamily {
    type Err = LabError;

    /// `singletons`, `tails:K`, `dyadic-heads:K`, or sets separated by `;`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let count = |v: &str| -> Result<u32> {
            v.parse()
                .map_err(|_| LabError::usage(format!("bad set count {v:?}")))
        };
        if s == "singletons" {
            Ok(SetFamily::Singletons)
        } else if let Some(k) = s.strip_prefix("tails:") {
            Ok(SetFamily::Tails { count: count(k)? })
        } else if let Some(k) = s.strip_prefix("dyadic-heads:") {
            Ok(SetFamily::DyadicHeads { count: count(k)? })
        } else {
            let sets = s
                .split(';')
                .map(|p| p.trim().parse::<MeasurableSet>())
                .collect::<Result<Vec<_>>>()?;
            Ok(SetFamily::Explicit { sets })
        }
    }
}

/// Maps points of a disjoint family to cell ids; `None` is outside every cell.
enum CellMap<'a> {
    Singletons(FxHashMap<PointKey, u64>),
    Explicit(&'a [MeasurableSet]),
}

impl CellMap<'_> {
    fn cell(&mut self, x: &Point) -> Result<Option<u64>> {
        match self {
            CellMap::Singletons(ids) => {
                let next = ids.len() as u64;
                Ok(Some(*ids.entry(x.key()).or_insert(next)))
            }
            CellMap::Explicit(sets) => {
                for (k, a) in sets.iter().enumerate() {
                    if a.contains(x)? {
                        return Ok(Some(k as u64));
                    }
                }
                Ok(None)
            }
        }
    }
}

impl SetFamily {
    fn disjoint_cells(&self) -> Result<CellMap<'_>> {
        match self {
            SetFamily::Singletons => Ok(CellMap::Singletons(FxHashMap::default())),
            SetFamily::Explicit { sets } => {
                for (i, a) in sets.iter().enumerate() {
                    for b in &sets[i + 1..] {
                        if !a.intersect(b)?.is_empty() {
                            return Err(LabError::config("sets", format!("cells {a} and {b} overlap")));
                        }
                    }
                }
                Ok(CellMap::Explicit(sets))
            }
            _ => Err(LabError::config("sets", "this condition needs a disjoint family")),
        }
    }

    /// Number of sets of a decreasing family met by the points.
    fn hits_monotone(&self, xs: &[Point]) -> Result<u64> {
        match self {
            SetFamily::Tails { count } => {
                let top = xs.iter().filter_map(|x| x.as_nat()).max().unwrap_or(0);
                Ok(top.min(u64::from(*count)))
            }
            SetFamily::DyadicHeads { count } => {
                let low = xs.iter().filter_map(|x| x.as_real()).fold(f64::INFINITY, f64::min);
                // x < 2^-k  <=>  k < -log2(x); count k = 1..=count with that property
                let mut k = 0u32;
                while k < *count && low < 0.5f64.powi(k as i32 + 1) {
                    k += 1;
                }
                Ok(u64::from(k))
            }
            SetFamily::Explicit { sets } => {
                let mut hits = 0;
                for a in sets {
                    let mut met = false;
                    for x in xs {
                        if a.contains(x)? {
                            met = true;
                            break;
                        }
                    }
                    if !met {
                        // later sets are subsets of this one
                        break;
                    }
                    hits += 1;
                }
                Ok(hits)
            }
            SetFamily::Singletons => Err(LabError::config("sets", "condition 3 needs a decreasing family")),
        }
    }

    fn check_monotone(&self) -> Result<()> {
        if let SetFamily::Explicit { sets } = self {
            for w in sets.windows(2) {
                if !w[1].is_subset_of(&w[0])? {
                    return Err(LabError::config("sets", format!("{} is not contained in {}", w[1], w[0])));
                }
            }
        }
        Ok(())
    }
}

fn check_checkpoints(checkpoints: &[usize], len: usize) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(LabError::config("checkpoints", "need at least one checkpoint"));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::config("checkpoints", "must be strictly increasing"));
    }
    if checkpoints[0] == 0 || *checkpoints.last().unwrap() > len {
        return Err(LabError::config(
            "checkpoints",
            format!("must lie in 1..={len}, the sample length"),
        ));
    }
    Ok(())
}

/// For each checkpoint `n`: the finite-horizon `mu_hat` of the union of cells
/// not visited by `x_{1:n}`, evaluated on the full sample. Points outside
/// every cell form one extra remainder cell.
pub fn condition1_curve(sample: &[Point], family: &SetFamily, checkpoints: &[usize]) -> Result<Vec<(usize, f64)>> {
    check_checkpoints(checkpoints, sample.len())?;
    let mut map = family.disjoint_cells()?;
    let cells = sample
        .iter()
        .map(|x| map.cell(x).map(|c| c.unwrap_or(u64::MAX)))
        .collect::<Result<Vec<_>>>()?;
    // first visit time of each cell
    let mut first: FxHashMap<u64, usize> = FxHashMap::default();
    for (t, &c) in cells.iter().enumerate() {
        first.entry(c).or_insert(t + 1);
    }
    let total = sample.len();
    let tail = default_tail_start(total);
    Ok(checkpoints
        .iter()
        .map(|&n| {
            let mut hits = 0usize;
            let mut best = 0.0f64;
            for (t, c) in cells.iter().enumerate() {
                if first[c] > n {
                    hits += 1;
                }
                if t + 1 >= tail {
                    best = best.max(hits as f64 / (t + 1) as f64);
                }
            }
            (n, best)
        })
        .collect())
}

/// `|{k : x_{1:T} meets A_k}| / T` at each checkpoint `T`.
pub fn condition2_curve(sample: &[Point], family: &SetFamily, checkpoints: &[usize]) -> Result<Vec<(usize, f64)>> {
    check_checkpoints(checkpoints, sample.len())?;
    let mut map = family.disjoint_cells()?;
    let mut seen = rustc_hash::FxHashSet::default();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    for (t, x) in sample.iter().enumerate() {
        if let Some(c) = map.cell(x)? {
            seen.insert(c);
        }
        if next < checkpoints.len() && checkpoints[next] == t + 1 {
            out.push((t + 1, seen.len() as f64 / (t + 1) as f64));
            next += 1;
        }
    }
    Ok(out)
}

/// Number of sets of the decreasing family met by the sample.
pub fn condition3_count(sample: &[Point], family: &SetFamily) -> Result<u64> {
    family.check_monotone()?;
    family.hits_monotone(sample)
}

/// Smallest and largest prefix frequency of `a` over the checkpoints.
pub fn crf_probe(sample: &[Point], a: &MeasurableSet, checkpoints: &[usize]) -> Result<(f64, f64)> {
    check_checkpoints(checkpoints, sample.len())?;
    let mut hits = 0usize;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut next = 0;
    for (t, x) in sample.iter().enumerate() {
        hits += a.contains(x)? as usize;
        if next < checkpoints.len() && checkpoints[next] == t + 1 {
            let f = hits as f64 / (t + 1) as f64;
            lo = lo.min(f);
            hi = hi.max(f);
            next += 1;
        }
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticSpec {
    pub condition: Condition,
    pub process: ProcessSpec,
    pub sets: SetFamily,
    pub checkpoints: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Sample length; defaults to the last checkpoint.
    #[serde(default)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagRecord {
    pub condition: Condition,
    pub seed: u64,
    pub checkpoint: usize,
    /// Set index for frequency brackets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set: Option<usize>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<(f64, f64)>,
    pub caveat: &'static str,
}

/// Mean over seeds at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagMean {
    pub checkpoint: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set: Option<usize>,
    pub mean: f64,
    pub caveat: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagReport {
    pub condition: Condition,
    pub process: String,
    pub records: Vec<DiagRecord>,
    pub means: Vec<DiagMean>,
    pub caveat: &'static str,
}

/// Largest sample a diagnostic run will draw.
pub const MAX_DIAG_HORIZON: usize = 100_000_000;

/// Runs the diagnostic on every seed; records are sorted by seed.
pub fn run_diagnostic(spec: &DiagnosticSpec, exec: Exec) -> Result<DiagReport> {
    if spec.seeds.is_empty() {
        return Err(LabError::config("seeds", "need at least one seed"));
    }
    let last = *spec
        .checkpoints
        .last()
        .ok_or_else(|| LabError::config("checkpoints", "need at least one checkpoint"))?;
    let horizon = spec.horizon.unwrap_or(last);
    if horizon > MAX_DIAG_HORIZON {
        return Err(LabError::Resource(format!("horizon {horizon} exceeds {MAX_DIAG_HORIZON}")));
    }
    if let Some(cap) = spec.process.horizon_cap() {
        if horizon as u64 > cap {
            return Err(LabError::Resource(format!(
                "{} supports at most {cap} steps",
                spec.process.name()
            )));
        }
    }
    check_checkpoints(&spec.checkpoints, horizon)?;
    make_process(&spec.process, 0)?;
    let mut seeds = spec.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let per_seed = exec.map_tasks(&seeds, |&seed| -> Result<Vec<DiagRecord>> {
        let sample = make_process(&spec.process, seed)?.take(horizon);
        let rec = |checkpoint, set, value, bracket| DiagRecord {
            condition: spec.condition,
            seed,
            checkpoint,
            set,
            value,
            bracket,
            caveat: CAVEAT,
        };
        Ok(match spec.condition {
            Condition::C1 => condition1_curve(&sample, &spec.sets, &spec.checkpoints)?
                .into_iter()
                .map(|(n, v)| rec(n, None, v, None))
                .collect(),
            Condition::C2 => condition2_curve(&sample, &spec.sets, &spec.checkpoints)?
                .into_iter()
                .map(|(n, v)| rec(n, None, v, None))
                .collect(),
            Condition::C3 => spec
                .checkpoints
                .iter()
                .map(|&n| Ok(rec(n, None, condition3_count(&sample[..n], &spec.sets)? as f64, None)))
                .collect::<Result<_>>()?,
            Condition::Crf => {
                let SetFamily::Explicit { sets } = &spec.sets else {
                    return Err(LabError::config("sets", "frequency brackets need explicit sets"));
                };
                sets.iter()
                    .enumerate()
                    .map(|(k, a)| {
                        let (lo, hi) = crf_probe(&sample, a, &spec.checkpoints)?;
                        Ok(rec(last, Some(k), hi - lo, Some((lo, hi))))
                    })
                    .collect::<Result<_>>()?
            }
        })
    });
    let records: Vec<DiagRecord> = per_seed.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    let mut sums: Vec<((usize, Option<usize>), f64)> = Vec::new();
    for r in &records {
        match sums.iter_mut().find(|(k, _)| *k == (r.checkpoint, r.set)) {
            Some(e) => e.1 += r.value,
            None => sums.push(((r.checkpoint, r.set), r.value)),
        }
    }
    let means = sums
        .into_iter()
        .map(|((checkpoint, set), s)| DiagMean {
            checkpoint,
            set,
            mean: s / seeds.len() as f64,
            caveat: CAVEAT,
        })
        .collect();
    Ok(DiagReport {
        condition: spec.condition,
        process: spec.process.name().to_string(),
        records,
        means,
        caveat: CAVEAT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_parse() {
        assert_eq!("singletons".parse::<SetFamily>().unwrap(), SetFamily::Singletons);
        assert_eq!("tails:5".parse::<SetFamily>().unwrap(), SetFamily::Tails { count: 5 });
        assert_eq!(
            "dyadic-heads:3".parse::<SetFamily>().unwrap(),
            SetFamily::DyadicHeads { count: 3 }
        );
        match "[0,1/2);{1,2}".parse::<SetFamily>() {
            Ok(SetFamily::Explicit { sets }) => assert_eq!(sets.len(), 2),
            other => panic!("{other:?}"),
        }
        assert!("wat".parse::<SetFamily>().is_err());
        assert_eq!("C2".parse::<Condition>().unwrap(), Condition::C2);
    }

    #[test]
    fn overlapping_cells_are_rejected() {
        let fam: SetFamily = "[0,1/2);[1/4,1]".parse().unwrap();
        let xs = vec![Point::Real(0.1)];
        assert!(matches!(condition1_curve(&xs, &fam, &[1]), Err(LabError::Config { .. })));
    }

    #[test]
    fn non_monotone_family_is_rejected() {
        let fam: SetFamily = "[0,1/2);[1/4,1]".parse().unwrap();
        assert!(condition3_count(&[Point::Real(0.1)], &fam).is_err());
    }

    #[test]
    fn checkpoints_must_increase() {
        let xs = vec![Point::Nat(0); 5];
        assert!(condition2_curve(&xs, &SetFamily::Singletons, &[3, 3]).is_err());
        assert!(condition2_curve(&xs, &SetFamily::Singletons, &[6]).is_err());
    }
}
