//! Seeded, replayable point processes and target-function families.
//!
//! Each process kind carries documentation of which consistency conditions
//! it satisfies. The claims are fixed metadata with a citation; nothing here
//! tries to infer them from samples.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::rng::StreamRng;
use crate::spaces::{InstanceSpace, MeasurableSet, Point, SimpleFunction, Value};

/// Block boundaries `n_1 = 1`, `n_k = n_{k-1} + k * n_{k-1}^2` of the
/// nearest-neighbor counterexample, for `k = 1..=kmax`.
pub fn nn_killer_boundaries(kmax: u32) -> Vec<u64> {
    let mut out = vec![1u64];
    for k in 2..=kmax as u64 {
        let prev = *out.last().unwrap();
        let next = prev
            .checked_mul(prev)
            .and_then(|sq| sq.checked_mul(k))
            .and_then(|v| v.checked_add(prev))
            .expect("block boundary overflow");
        out.push(next);
    }
    out
}

/// Horizon cap for the nearest-neighbor counterexample: `n_5`.
pub const NN_KILLER_HORIZON: u64 = 65_888_130;

/// The deterministic point `b_k / 2 + (i - 1) / (2 n_{k-1}^2)` of block `k`.
pub fn nn_killer_grid_point(k: u64, i: u64, n_prev: u64) -> f64 {
    let b = k.is_multiple_of(2) as u64 as f64;
    b * 0.5 + (i - 1) as f64 / (2 * n_prev * n_prev) as f64
}

/// Whether `x` is one of the deterministic grid points of blocks `2..=kmax`,
/// computed exactly as the generator emits them.
pub fn nn_killer_on_grid(x: f64, kmax: u32) -> bool {
    let bounds = nn_killer_boundaries(kmax);
    for k in 2..=kmax as u64 {
        let n_prev = bounds[k as usize - 2];
        let b = k.is_multiple_of(2) as u64 as f64 * 0.5;
        let offset = x - b;
        if !(0.0..0.5).contains(&offset) {
            continue;
        }
        let den = (2 * n_prev * n_prev) as f64;
        let j = (offset * den).round();
        for cand in [j - 1.0, j, j + 1.0] {
            if cand >= 0.0 && cand < (n_prev * n_prev) as f64 && nn_killer_grid_point(k, cand as u64 + 1, n_prev) == x
            {
                return true;
            }
        }
    }
    false
}

/// `kappa_i = floor(2^i kappa) - 2 floor(2^{i-1} kappa)`, the `i`-th binary
/// digit of `kappa`. Scaling by powers of two is exact in floating point.
pub fn kappa_bit(kappa: f64, i: u32) -> Result<u8> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(LabError::usage(format!("kappa {kappa} outside [0,1)")));
    }
    if i == 0 {
        return Err(LabError::usage("bit index starts at 1"));
    }
    let hi = (kappa * 2f64.powi(i as i32)).floor();
    let lo = (kappa * 2f64.powi(i as i32 - 1)).floor();
    Ok((hi - 2.0 * lo) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimStatus {
    Holds,
    Fails,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Claim {
    pub status: ClaimStatus,
    pub citation: &'static str,
}

const fn claim(status: ClaimStatus, citation: &'static str) -> Claim {
    Claim { status, citation }
}

/// Documented membership in conditions 1, 2, 3 and CRF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Claims {
    pub c1: Claim,
    pub c2: Claim,
    pub c3: Claim,
    pub crf: Claim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    /// I.i.d. Uniform[0,1).
    IidUniform,
    /// I.i.d. uniform on `{0, ..., support-1}`.
    IidNat { support: u64 },
    /// Lazy random walk on `{0, ..., states-1}`: stay with probability
    /// `stay`, otherwise jump to a uniformly chosen other state.
    Markov { states: u64, stay: f64 },
    Constant {
        space: InstanceSpace,
        value: f64,
    },
    /// Blocks of growing length alternating which half of [0,1/2) / [1/2,1]
    /// is dense, defeating the nearest-neighbor rule.
    NnKiller,
    /// `X_t = x_1` on blocks `3^{i-1} <= t < 3^i` with odd `i`, else `x_0`.
    DoublingBlock {
        #[serde(default = "nat_space")]
        space: InstanceSpace,
        #[serde(default)]
        x0: f64,
        #[serde(default = "one")]
        x1: f64,
    },
    /// `X_t = z_{floor(log2(2t))}` with `z_i = i` on the naturals.
    LogGrowth,
    /// On block `2^{k-1} <= t < 2^k`, `X_t = t` if a Bernoulli(1/k) coin
    /// came up heads for the block, else `X_t = 0`.
    BernoulliBlock,
    /// `X_t = t`: every point is new.
    FreshPoint,
}

fn nat_space() -> InstanceSpace {
    InstanceSpace::Nat
}

fn one() -> f64 {
    1.0
}

impl ProcessSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessSpec::IidUniform => "iid_uniform",
            ProcessSpec::IidNat { .. } => "iid_nat",
            ProcessSpec::Markov { .. } => "markov",
            ProcessSpec::Constant { .. } => "constant",
            ProcessSpec::NnKiller => "nn_killer",
            ProcessSpec::DoublingBlock { .. } => "doubling_block",
            ProcessSpec::LogGrowth => "log_growth",
            ProcessSpec::BernoulliBlock => "bernoulli_block",
            ProcessSpec::FreshPoint => "fresh_point",
        }
    }

    /// Every kind with default parameters, for listings.
    pub fn catalog() -> Vec<ProcessSpec> {
        vec![
            ProcessSpec::IidUniform,
            ProcessSpec::IidNat { support: 10 },
            ProcessSpec::Markov { states: 4, stay: 0.9 },
            ProcessSpec::Constant {
                space: InstanceSpace::Nat,
                value: 0.0,
            },
            ProcessSpec::NnKiller,
            ProcessSpec::DoublingBlock {
                space: InstanceSpace::Nat,
                x0: 0.0,
                x1: 1.0,
            },
            ProcessSpec::LogGrowth,
            ProcessSpec::BernoulliBlock,
            ProcessSpec::FreshPoint,
        ]
    }

    pub fn space(&self) -> InstanceSpace {
        match self {
            ProcessSpec::IidUniform | ProcessSpec::NnKiller => InstanceSpace::Unit,
            ProcessSpec::Constant { space, .. } | ProcessSpec::DoublingBlock { space, .. } => *space,
            _ => InstanceSpace::Nat,
        }
    }

    /// Horizon beyond which streams of this kind are not supported.
    pub fn horizon_cap(&self) -> Option<u64> {
        match self {
            ProcessSpec::NnKiller => Some(NN_KILLER_HORIZON),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::config("process.params", m));
        match self {
            ProcessSpec::IidNat { support } if *support == 0 => bad("support must be positive".into()),
            ProcessSpec::Markov { states, stay } => {
                if *states < 2 {
                    bad("markov needs at least 2 states".into())
                } else if !(0.0..=1.0).contains(stay) {
                    bad(format!("stay probability {stay} outside [0,1]"))
                } else {
                    Ok(())
                }
            }
            ProcessSpec::Constant { space, value } => point_from(*space, *value).map(|_| ()),
            ProcessSpec::DoublingBlock { space, x0, x1 } => {
                let (a, b) = (point_from(*space, *x0)?, point_from(*space, *x1)?);
                if a.key() == b.key() {
                    bad("doubling_block needs distinct points".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn claims(&self) -> Claims {
        use ClaimStatus::*;
        match self {
            ProcessSpec::IidUniform => Claims {
                c1: claim(Holds, "CRF implies C1 (Thm. crf-implies-kc)"),
                c2: claim(Holds, "C1 implies C2"),
                c3: claim(Fails, "infinitely many distinct points on [0,1]; A_k=[0,2^-k) all visited"),
                crf: claim(Holds, "strong law of large numbers"),
            },
            ProcessSpec::IidNat { .. } | ProcessSpec::Markov { .. } | ProcessSpec::Constant { .. } => Claims {
                c1: claim(Holds, "finitely many distinct points"),
                c2: claim(Holds, "finitely many distinct points"),
                c3: claim(Holds, "finitely many distinct points"),
                crf: claim(Holds, "ergodic finite-state chain / constant"),
            },
            ProcessSpec::NnKiller => Claims {
                c1: claim(Holds, "nearest-neighbor counterexample: E[mu(A)] <= 2 lambda(A)"),
                c2: claim(Holds, "C1 implies C2"),
                c3: claim(Fails, "uniform draws visit every A_k=(0,2^-k)"),
                crf: claim(Fails, "dense side alternates between blocks"),
            },
            ProcessSpec::DoublingBlock { .. } => Claims {
                c1: claim(Holds, "two distinct points (Thm. crf-implies-kc proof)"),
                c2: claim(Holds, "two distinct points"),
                c3: claim(Holds, "two distinct points"),
                crf: claim(Fails, "frequency >= 2/3 at odd blocks, <= 1/3 at even blocks"),
            },
            ProcessSpec::LogGrowth => Claims {
                c1: claim(Fails, "mu(A_k) >= 1/2 for infinite disjoint A_k (Thm. suil-subset-suol)"),
                c2: claim(Holds, "distinct count floor(log2(2T)) = o(T) (Thm. suil-subset-suol)"),
                c3: claim(Fails, "C3 is contained in C1"),
                crf: claim(Fails, "CRF is contained in C1"),
            },
            ProcessSpec::BernoulliBlock => Claims {
                c1: claim(Fails, "C1 is contained in C2"),
                c2: claim(Fails, "second Borel-Cantelli: infinitely many full blocks"),
                c3: claim(Fails, "C3 is contained in C1"),
                crf: claim(Fails, "CRF is contained in C1"),
            },
            ProcessSpec::FreshPoint => Claims {
                c1: claim(Fails, "C1 is contained in C2"),
                c2: claim(Fails, "T distinct points among T"),
                c3: claim(Fails, "every tail set is visited"),
                crf: claim(Fails, "CRF is contained in C1"),
            },
        }
    }
}

fn point_from(space: InstanceSpace, v: f64) -> Result<Point> {
    match space {
        InstanceSpace::Unit => Point::real(v).map_err(|e| LabError::config("process.params", e.to_string())),
        InstanceSpace::Nat if v >= 0.0 && v.fract() == 0.0 => Ok(Point::Nat(v as u64)),
        InstanceSpace::Nat => Err(LabError::config("process.params", format!("{v} is not a natural"))),
    }
}

#[derive(Debug, Clone)]
enum Cursor {
    Plain,
    Markov { state: u64 },
    NnKiller { k: u64, n_prev: u64, n_k: u64 },
    Doubling { block: u32, end: u64 },
    Bernoulli { k: u32, end: u64, on: bool },
}

/// A seeded stream positioned at time `t` (the number of points emitted).
#[derive(Debug, Clone)]
pub struct ProcessStream {
    spec: ProcessSpec,
    seed: u64,
    t: u64,
    rng: StreamRng,
    cursor: Cursor,
    fixed: (Point, Point),
}

/// `make_process`: validates the parameters and opens a stream at cursor 0.
pub fn make_process(spec: &ProcessSpec, seed: u64) -> Result<ProcessStream> {
    spec.validate()?;
    let cursor = match spec {
        ProcessSpec::Markov { .. } => Cursor::Markov { state: u64::MAX },
        ProcessSpec::NnKiller => Cursor::NnKiller { k: 1, n_prev: 0, n_k: 1 },
        ProcessSpec::DoublingBlock { .. } => Cursor::Doubling { block: 0, end: 0 },
        ProcessSpec::BernoulliBlock => Cursor::Bernoulli { k: 0, end: 0, on: false },
        _ => Cursor::Plain,
    };
    let fixed = match spec {
        ProcessSpec::Constant { space, value } => {
            let p = point_from(*space, *value)?;
            (p, p)
        }
        ProcessSpec::DoublingBlock { space, x0, x1 } => (point_from(*space, *x0)?, point_from(*space, *x1)?),
        _ => (Point::Nat(0), Point::Nat(0)),
    };
    Ok(ProcessStream {
        spec: spec.clone(),
        seed,
        t: 0,
        rng: StreamRng::new(seed),
        cursor,
        fixed,
    })
}

impl ProcessStream {
    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of points emitted so far.
    pub fn cursor(&self) -> u64 {
        self.t
    }

    pub fn claims(&self) -> Claims {
        self.spec.claims()
    }

    /// `stream_next`: emits `X_{t+1}`.
    pub fn next_point(&mut self) -> Point {
        self.t += 1;
        let t = self.t;
        match (&self.spec, &mut self.cursor) {
            (ProcessSpec::IidUniform, _) => Point::Real(self.rng.uniform()),
            (ProcessSpec::IidNat { support }, _) => Point::Nat(self.rng.below(*support)),
            (ProcessSpec::Markov { states, stay }, Cursor::Markov { state }) => {
                if *state == u64::MAX {
                    *state = self.rng.below(*states);
                } else if !self.rng.bernoulli(*stay) {
                    let jump = 1 + self.rng.below(*states - 1);
                    *state = (*state + jump) % *states;
                }
                Point::Nat(*state)
            }
            (ProcessSpec::Constant { .. }, _) => self.fixed.0,
            (ProcessSpec::NnKiller, Cursor::NnKiller { k, n_prev, n_k }) => {
                if t == 1 {
                    return Point::Real(0.0);
                }
                if t > *n_k {
                    *k += 1;
                    *n_prev = *n_k;
                    *n_k = *n_prev + *k * *n_prev * *n_prev;
                }
                let r = t - *n_prev - 1;
                let (i, j) = (r / *k + 1, r % *k + 1);
                if j == 1 {
                    Point::Real(nn_killer_grid_point(*k, i, *n_prev))
                } else {
                    let a = (*k % 2) as f64 * 0.5;
                    Point::Real(a + 0.5 * self.rng.uniform_open())
                }
            }
            (ProcessSpec::DoublingBlock { .. }, Cursor::Doubling { block, end }) => {
                if t >= *end {
                    *block += 1;
                    *end = 3u64.pow(*block);
                }
                if *block % 2 == 1 {
                    self.fixed.1
                } else {
                    self.fixed.0
                }
            }
            (ProcessSpec::LogGrowth, _) => Point::Nat(u64::from(64 - t.leading_zeros())),
            (ProcessSpec::BernoulliBlock, Cursor::Bernoulli { k, end, on }) => {
                if t > *end {
                    *k += 1;
                    *end = (1u64 << *k) - 1;
                    *on = self.rng.bernoulli(1.0 / *k as f64);
                }
                if *on {
                    Point::Nat(t)
                } else {
                    Point::Nat(0)
                }
            }
            (ProcessSpec::FreshPoint, _) => Point::Nat(t),
            _ => unreachable!("cursor matches spec"),
        }
    }

    /// The next `n` points.
    pub fn take(&mut self, n: usize) -> Vec<Point> {
        (0..n).map(|_| self.next_point()).collect()
    }
}

/// Partition `(A_1, A_2, ...)` used by the binary-expansion targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionSpec {
    /// `A_i = {i - 1}` on the naturals.
    NatSingletons,
    /// `A_i = [1 - 2^{1-i}, 1 - 2^{-i})` on the unit interval (the point 1 is
    /// not covered).
    Halvings,
    /// An explicit finite list of disjoint cells.
    Cells { cells: Vec<MeasurableSet> },
}

impl PartitionSpec {
    /// 1-based index of the cell containing `x`.
    pub fn index_of(&self, x: &Point) -> Result<Option<u32>> {
        match (self, x) {
            (PartitionSpec::NatSingletons, Point::Nat(k)) => Ok(u32::try_from(*k + 1).ok()),
            (PartitionSpec::Halvings, Point::Real(v)) => {
                if *v >= 1.0 {
                    return Ok(None);
                }
                // x in [1 - 2^{1-i}, 1 - 2^{-i})  <=>  i = floor(-log2(1 - x)) + 1
                let mut i = 1u32;
                let mut hi = 0.5;
                while *v >= 1.0 - hi && i < 1100 {
                    i += 1;
                    hi *= 0.5;
                }
                Ok(Some(i))
            }
            (PartitionSpec::Cells { cells }, _) => {
                for (k, c) in cells.iter().enumerate() {
                    if c.contains(x)? {
                        return Ok(Some(k as u32 + 1));
                    }
                }
                Ok(None)
            }
            _ => Err(LabError::usage(format!("point {x} does not match the partition space"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Constant {
        value: Value,
    },
    /// Explicit cells with values plus a default.
    Simple {
        space: InstanceSpace,
        cells: Vec<(MeasurableSet, Value)>,
        default: Value,
    },
    /// Value `values[j]` on the dyadic cell `[j/2^L, (j+1)/2^L)`.
    Dyadic {
        level: u32,
        values: Vec<Value>,
    },
    /// `y_{kappa_i}` on cell `A_i`, where `kappa_i` is the `i`-th binary digit.
    Kappa {
        kappa: f64,
        partition: PartitionSpec,
        #[serde(default)]
        y0: Value,
        #[serde(default = "one")]
        y1: Value,
    },
    /// `y0` on the deterministic grid of the nearest-neighbor counterexample,
    /// `y1` elsewhere.
    NnKiller {
        #[serde(default)]
        y0: Value,
        #[serde(default = "one")]
        y1: Value,
    },
}

/// An evaluable target function.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetFunction {
    Constant(Value),
    Simple(SimpleFunction),
    Kappa {
        kappa: f64,
        partition: PartitionSpec,
        y0: Value,
        y1: Value,
    },
    NnKiller { y0: Value, y1: Value },
}

impl TargetFunction {
    pub fn from_spec(spec: &TargetSpec) -> Result<Self> {
        Ok(match spec {
            TargetSpec::Constant { value } => TargetFunction::Constant(*value),
            TargetSpec::Simple { space, cells, default } => {
                TargetFunction::Simple(SimpleFunction::new(*space, cells.clone(), *default)?)
            }
            TargetSpec::Dyadic { level, values } => {
                let n = 1usize << level;
                if *level > 20 || values.len() != n {
                    return Err(LabError::config(
                        "target.values",
                        format!("dyadic level {level} needs {n} values"),
                    ));
                }
                let cells = (0..n as i64)
                    .map(|j| Ok((MeasurableSet::interval((j, n as i64), (j + 1, n as i64))?, values[j as usize])))
                    .collect::<Result<Vec<_>>>()?;
                TargetFunction::Simple(SimpleFunction::new(InstanceSpace::Unit, cells, values[0])?)
            }
            TargetSpec::Kappa {
                kappa,
                partition,
                y0,
                y1,
            } => {
                if !(0.0..1.0).contains(kappa) {
                    return Err(LabError::config("target.kappa", "must lie in [0,1)"));
                }
                TargetFunction::Kappa {
                    kappa: *kappa,
                    partition: partition.clone(),
                    y0: *y0,
                    y1: *y1,
                }
            }
            TargetSpec::NnKiller { y0, y1 } => TargetFunction::NnKiller { y0: *y0, y1: *y1 },
        })
    }

    /// `target_eval`.
    pub fn eval(&self, x: &Point) -> Result<Value> {
        match self {
            TargetFunction::Constant(v) => Ok(*v),
            TargetFunction::Simple(f) => f.eval(x),
            TargetFunction::Kappa {
                kappa,
                partition,
                y0,
                y1,
            } => {
                let i = partition
                    .index_of(x)?
                    .ok_or_else(|| LabError::usage(format!("point {x} outside every partition cell")))?;
                // digits past the float's precision are zero
                let bit = if i > 1074 { 0 } else { kappa_bit(*kappa, i)? };
                Ok(if bit == 1 { *y1 } else { *y0 })
            }
            TargetFunction::NnKiller { y0, y1 } => {
                let v = x
                    .as_real()
                    .ok_or_else(|| LabError::usage("nn_killer target lives on [0,1]"))?;
                Ok(if nn_killer_on_grid(v, 5) { *y0 } else { *y1 })
            }
        }
    }

    /// Distinct values the target can take, when known.
    pub fn values(&self) -> Vec<Value> {
        match self {
            TargetFunction::Constant(v) => vec![*v],
            TargetFunction::Simple(f) => {
                let mut v: Vec<Value> = f.cells().iter().map(|c| c.1).collect();
                v.push(f.default_value());
                v
            }
            TargetFunction::Kappa { y0, y1, .. } | TargetFunction::NnKiller { y0, y1 } => vec![*y0, *y1],
        }
    }
}
