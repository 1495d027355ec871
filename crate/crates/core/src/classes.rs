//! Nested finite classes of simple functions.
//!
//! Every class is a prefix of one fixed enumeration. Functions are grouped in
//! stages `(r, g)`: resolution `r` (dyadic cells of width `2^-r` on the unit
//! interval, or singletons `{0}, ..., {r-1}` plus a remainder cell on the
//! naturals) and grid size `g` (values drawn from the first `g` elements of the
//! dense value grid). Stages are visited along anti-diagonals `r + g - 1 = d`,
//! and a stage only emits functions whose minimal resolution is `r` and whose
//! minimal grid size is `g`, so every function appears exactly once.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::spaces::{InstanceSpace, LossSpace, MeasurableSet, Point, SimpleFunction, Value, ValueSpace};

/// Largest class size accepted without an explicit override.
pub const DEFAULT_CLASS_CAP: usize = 4096;
/// Hard ceiling on class sizes even with an override.
pub const HARD_CLASS_LIMIT: usize = 1 << 20;

/// First `i` elements of the fixed dense enumeration of the value space.
///
/// Finite spaces return at most all of their values.
pub fn dense_grid(values: ValueSpace, i: usize) -> Vec<Value> {
    match values {
        ValueSpace::Binary => [0.0, 1.0].into_iter().take(i).collect(),
        ValueSpace::Labels { k } => (0..k as usize).take(i).map(|v| v as f64).collect(),
        ValueSpace::Natural => (0..i).map(|v| v as f64).collect(),
        ValueSpace::UnitReal => {
            let mut out = Vec::with_capacity(i);
            let mut level = 1u32;
            while out.len() < i {
                let den = (1u64 << level) as f64;
                for j in 0..(1u64 << (level - 1)) {
                    if out.len() == i {
                        break;
                    }
                    out.push((2 * j + 1) as f64 / den);
                }
                level += 1;
            }
            out
        }
    }
}

fn max_grid(values: ValueSpace) -> Option<usize> {
    match values {
        ValueSpace::Binary => Some(2),
        ValueSpace::Labels { k } => Some(k as usize),
        ValueSpace::Natural | ValueSpace::UnitReal => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    /// Class size grows by this many functions per stage: `N(i) = growth * i`.
    #[serde(default = "default_growth")]
    pub growth: usize,
    #[serde(default = "default_cap")]
    pub cap: usize,
    /// Optional bound on the grid size `g`.
    #[serde(default)]
    pub value_grid: Option<usize>,
}

fn default_growth() -> usize {
    4
}

fn default_cap() -> usize {
    DEFAULT_CLASS_CAP
}

impl Default for ClassConfig {
    fn default() -> Self {
        ClassConfig {
            growth: default_growth(),
            cap: default_cap(),
            value_grid: None,
        }
    }
}

/// Enumeration schedule for the nested classes `F_1 ⊆ F_2 ⊆ ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSchedule {
    pub space: InstanceSpace,
    pub values: ValueSpace,
    pub growth: usize,
    pub cap: usize,
    pub value_grid: Option<usize>,
}

impl ClassSchedule {
    pub fn new(space: InstanceSpace, values: ValueSpace, cfg: &ClassConfig) -> Result<Self> {
        if cfg.growth == 0 {
            return Err(LabError::config("class.growth", "must be positive"));
        }
        if cfg.cap == 0 || cfg.cap > HARD_CLASS_LIMIT {
            return Err(LabError::config(
                "class.cap",
                format!("must lie in 1..={HARD_CLASS_LIMIT}"),
            ));
        }
        if matches!(cfg.value_grid, Some(0)) {
            return Err(LabError::config("class.value_grid", "must be positive"));
        }
        Ok(ClassSchedule {
            space,
            values,
            growth: cfg.growth,
            cap: cfg.cap,
            value_grid: cfg.value_grid,
        })
    }

    pub fn with_defaults(space: InstanceSpace, values: ValueSpace) -> Self {
        ClassSchedule::new(space, values, &ClassConfig::default()).expect("defaults are valid")
    }

    /// Class size at stage `i`: `growth * i`, saturating at the cap.
    pub fn size(&self, i: usize) -> Result<usize> {
        if i == 0 {
            return Err(LabError::usage("class stage index starts at 1"));
        }
        let n = self
            .growth
            .checked_mul(i)
            .ok_or_else(|| LabError::Resource(format!("class size overflow at stage {i}")))?;
        Ok(n.min(self.cap))
    }

    fn grid_limit(&self) -> Option<usize> {
        match (max_grid(self.values), self.value_grid) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn cells_at(&self, r: u32) -> usize {
        match self.space {
            InstanceSpace::Unit => 1usize << r,
            InstanceSpace::Nat => r as usize + 1,
        }
    }

    /// True when the value assignment at resolution `r` cannot be expressed
    /// at resolution `r - 1`.
    fn is_minimal(&self, r: u32, a: &[u32]) -> bool {
        if r == 0 {
            return true;
        }
        match self.space {
            InstanceSpace::Unit => a.chunks(2).any(|p| p[0] != p[1]),
            InstanceSpace::Nat => a[r as usize - 1] != a[r as usize],
        }
    }

    /// The first `count` members of the enumeration.
    pub fn members(&self, count: usize) -> Result<Vec<ClassMember>> {
        let limit = self.grid_limit();
        let mut out = Vec::with_capacity(count);
        let mut diag = 0u32;
        while out.len() < count {
            if limit == Some(1) && diag > 0 {
                return Err(LabError::Resource(format!(
                    "a single-value grid admits one function; {count} requested"
                )));
            }
            for r in 0..=diag {
                let g = (diag - r + 1) as usize;
                if limit.is_some_and(|l| g > l) {
                    continue;
                }
                if r >= 62 {
                    return Err(LabError::Resource("enumeration resolution overflow".into()));
                }
                self.emit_stage(r, g, count, &mut out);
                if out.len() >= count {
                    break;
                }
            }
            diag += 1;
        }
        out.truncate(count);
        Ok(out)
    }

    fn emit_stage(&self, r: u32, g: usize, count: usize, out: &mut Vec<ClassMember>) {
        let cells = self.cells_at(r);
        let top = g as u32 - 1;
        let mut a = vec![0u32; cells];
        loop {
            if a.iter().copied().max() == Some(top) && self.is_minimal(r, &a) {
                out.push(ClassMember {
                    resolution: r,
                    values: a.clone(),
                });
                if out.len() >= count {
                    return;
                }
            }
            // lexicographic increment, last cell fastest
            let mut k = cells;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if a[k] < top {
                    a[k] += 1;
                    a[k + 1..].iter_mut().for_each(|d| *d = 0);
                    break;
                }
            }
        }
    }

    /// Builds the class at stage `i`.
    pub fn class(&self, i: usize) -> Result<FunctionClass> {
        let n = self.size(i)?;
        FunctionClass::build(self, n)
    }

    /// Builds the largest class the schedule can reach (the cap).
    pub fn full_class(&self) -> Result<FunctionClass> {
        FunctionClass::build(self, self.cap)
    }
}

/// One enumerated function: a resolution and a grid index per cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassMember {
    pub resolution: u32,
    pub values: Vec<u32>,
}

impl ClassMember {
    /// Grid index taken on finest cell `c` of a `CellIndexer` at resolution
    /// `fine >= self.resolution`.
    #[inline]
    pub fn index_on(&self, space: InstanceSpace, fine: u32, c: usize) -> u32 {
        match space {
            InstanceSpace::Unit => self.values[c >> (fine - self.resolution)],
            InstanceSpace::Nat => self.values[c.min(self.resolution as usize)],
        }
    }
}

/// Maps points to cells of the finest resolution in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellIndexer {
    pub space: InstanceSpace,
    pub resolution: u32,
}

impl CellIndexer {
    pub fn cells(&self) -> usize {
        match self.space {
            InstanceSpace::Unit => 1usize << self.resolution,
            InstanceSpace::Nat => self.resolution as usize + 1,
        }
    }

    /// Cell index of a point; the point 1 falls in the last dyadic cell.
    #[inline]
    pub fn cell_of(&self, x: &Point) -> usize {
        match *x {
            Point::Real(v) => {
                let n = 1usize << self.resolution;
                // scaling by a power of two is exact
                ((v * n as f64).floor() as usize).min(n - 1)
            }
            Point::Nat(k) => (k.min(self.resolution as u64)) as usize,
        }
    }
}

/// A materialized class prefix together with its value grid.
#[derive(Debug, Clone)]
pub struct FunctionClass {
    pub space: InstanceSpace,
    pub grid: Vec<Value>,
    pub members: Vec<ClassMember>,
    indexer: CellIndexer,
    /// Member values laid out on the finest cells, row-major by member.
    table: Vec<Value>,
}

impl FunctionClass {
    fn build(schedule: &ClassSchedule, n: usize) -> Result<Self> {
        let members = schedule.members(n)?;
        FunctionClass::from_members(schedule.space, schedule.values, members)
    }

    pub fn from_members(space: InstanceSpace, values: ValueSpace, members: Vec<ClassMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(LabError::usage("function class is empty"));
        }
        let g = members
            .iter()
            .flat_map(|m| m.values.iter())
            .copied()
            .max()
            .unwrap_or(0) as usize
            + 1;
        let grid = dense_grid(values, g);
        let resolution = members.iter().map(|m| m.resolution).max().unwrap_or(0);
        let indexer = CellIndexer { space, resolution };
        let cells = indexer.cells();
        let mut table = Vec::with_capacity(members.len() * cells);
        for m in &members {
            for c in 0..cells {
                table.push(grid[m.index_on(space, resolution, c) as usize]);
            }
        }
        Ok(FunctionClass {
            space,
            grid,
            members,
            indexer,
            table,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn indexer(&self) -> CellIndexer {
        self.indexer
    }

    /// Values of member `j` on every finest cell.
    #[inline]
    pub fn row(&self, j: usize) -> &[Value] {
        let cells = self.indexer.cells();
        &self.table[j * cells..(j + 1) * cells]
    }

    #[inline]
    pub fn value_at_cell(&self, j: usize, c: usize) -> Value {
        self.table[j * self.indexer.cells() + c]
    }

    pub fn eval(&self, j: usize, x: &Point) -> Value {
        self.value_at_cell(j, self.indexer.cell_of(x))
    }

    /// Exact `sup_x loss(f_a(x), f_b(x))`, computed over the finest cells.
    pub fn sup_distance(&self, a: usize, b: usize, space: &LossSpace) -> f64 {
        self.row(a)
            .iter()
            .zip(self.row(b))
            .map(|(&u, &v)| space.eval(u, v))
            .fold(0.0, f64::max)
    }

    pub fn simple_function(&self, j: usize) -> SimpleFunction {
        member_to_simple(self.space, &self.grid, &self.members[j])
    }
}

/// Converts an enumerated member into an explicit simple function.
pub fn member_to_simple(space: InstanceSpace, grid: &[Value], m: &ClassMember) -> SimpleFunction {
    let cells = match space {
        InstanceSpace::Unit => {
            let n = 1i64 << m.resolution;
            (0..n)
                .map(|j| {
                    let set = MeasurableSet::interval((j, n), (j + 1, n)).expect("dyadic cell");
                    (set, grid[m.values[j as usize] as usize])
                })
                .collect()
        }
        InstanceSpace::Nat => (0..m.resolution as u64)
            .map(|j| (MeasurableSet::finite([j]), grid[m.values[j as usize] as usize]))
            .collect(),
    };
    let default = match space {
        InstanceSpace::Unit => grid[m.values[0] as usize],
        InstanceSpace::Nat => grid[m.values[m.resolution as usize] as usize],
    };
    SimpleFunction::new(space, cells, default).expect("disjoint cells")
}

/// `enumerate_class`: the first `N(i)` functions of the enumeration.
pub fn enumerate_class(schedule: &ClassSchedule, i: usize) -> Result<Vec<SimpleFunction>> {
    let class = schedule.class(i)?;
    Ok((0..class.len()).map(|j| class.simple_function(j)).collect())
}

/// Exact sup-loss distance between two simple functions: the maximum loss
/// over the cells of their common refinement.
pub fn sup_loss_distance(f: &SimpleFunction, g: &SimpleFunction, space: &LossSpace) -> Result<f64> {
    if f.space() != g.space() {
        return Err(LabError::usage("simple functions over different instance spaces"));
    }
    let mut best = 0.0f64;
    for (a, va) in f.pieces() {
        for (b, vb) in g.pieces() {
            if !a.intersect(&b)?.is_empty() {
                best = best.max(space.eval(va, vb));
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::LossKind;

    fn binary_unit() -> ClassSchedule {
        ClassSchedule::with_defaults(InstanceSpace::Unit, ValueSpace::Binary)
    }

    #[test]
    fn grids_follow_the_stated_orders() {
        assert_eq!(dense_grid(ValueSpace::UnitReal, 3), vec![0.5, 0.25, 0.75]);
        assert_eq!(dense_grid(ValueSpace::UnitReal, 7)[3..], [0.125, 0.375, 0.625, 0.875]);
        assert_eq!(dense_grid(ValueSpace::Binary, 2), vec![0.0, 1.0]);
        assert_eq!(dense_grid(ValueSpace::Binary, 5), vec![0.0, 1.0]);
        assert_eq!(dense_grid(ValueSpace::Natural, 3), vec![0.0, 1.0, 2.0]);
        for i in 1..40 {
            let a = dense_grid(ValueSpace::UnitReal, i);
            let b = dense_grid(ValueSpace::UnitReal, i + 1);
            assert_eq!(&b[..i], &a[..]);
        }
    }

    #[test]
    fn class_sizes_grow_linearly_and_nest() {
        let s = ClassSchedule::new(
            InstanceSpace::Unit,
            ValueSpace::Binary,
            &ClassConfig {
                growth: 1,
                ..ClassConfig::default()
            },
        )
        .unwrap();
        assert_eq!(enumerate_class(&s, 1).unwrap().len(), 1);
        let three = enumerate_class(&s, 3).unwrap();
        let five = enumerate_class(&s, 5).unwrap();
        assert_eq!(three.len(), 3);
        assert_eq!(&five[..3], &three[..]);
        assert!(enumerate_class(&s, 0).is_err());
    }

    #[test]
    fn size_saturates_at_cap() {
        let s = binary_unit();
        assert_eq!(s.size(1).unwrap(), 4);
        assert_eq!(s.size(1024).unwrap(), 4096);
        assert_eq!(s.size(5000).unwrap(), 4096);
        assert!(matches!(s.size(usize::MAX), Err(LabError::Resource(_))));
    }

    #[test]
    fn members_are_distinct() {
        let s = binary_unit();
        let ms = s.members(600).unwrap();
        let class = FunctionClass::from_members(s.space, s.values, ms).unwrap();
        let mut rows: Vec<Vec<u64>> = (0..class.len())
            .map(|j| class.row(j).iter().map(|v| v.to_bits()).collect())
            .collect();
        rows.sort();
        rows.dedup();
        assert_eq!(rows.len(), 600);
    }

    #[test]
    fn single_value_grid_is_exhausted() {
        let s = ClassSchedule::new(
            InstanceSpace::Unit,
            ValueSpace::Binary,
            &ClassConfig {
                value_grid: Some(1),
                ..ClassConfig::default()
            },
        )
        .unwrap();
        assert_eq!(s.members(1).unwrap().len(), 1);
        assert!(matches!(s.members(2), Err(LabError::Resource(_))));
    }

    #[test]
    fn sup_distance_examples() {
        let zo = LossSpace::binary_zero_one();
        let f0 = SimpleFunction::constant(InstanceSpace::Unit, 0.0);
        let g = SimpleFunction::new(
            InstanceSpace::Unit,
            vec![("[0,1/2)".parse().unwrap(), 1.0)],
            0.0,
        )
        .unwrap();
        assert_eq!(sup_loss_distance(&f0, &f0, &zo).unwrap(), 0.0);
        assert_eq!(sup_loss_distance(&f0, &g, &zo).unwrap(), 1.0);

        let abs = LossSpace::new(ValueSpace::UnitReal, LossKind::Absolute);
        let f = SimpleFunction::constant(InstanceSpace::Unit, 0.2);
        let h = SimpleFunction::new(
            InstanceSpace::Unit,
            vec![("[0,1/4)".parse().unwrap(), 0.9)],
            0.2,
        )
        .unwrap();
        let d = sup_loss_distance(&f, &h, &abs).unwrap();
        assert!((d - 0.7).abs() < 1e-12);
    }

    #[test]
    fn cell_distance_matches_explicit_refinement() {
        let s = ClassSchedule::with_defaults(InstanceSpace::Nat, ValueSpace::Labels { k: 3 });
        let class = s.class(20).unwrap();
        let space = LossSpace::new(ValueSpace::Labels { k: 3 }, LossKind::Absolute);
        for a in (0..class.len()).step_by(7) {
            for b in (0..class.len()).step_by(5) {
                let fast = class.sup_distance(a, b, &space);
                let slow =
                    sup_loss_distance(&class.simple_function(a), &class.simple_function(b), &space).unwrap();
                assert_eq!(fast, slow);
            }
        }
    }

    #[test]
    fn member_evaluation_matches_simple_function() {
        let s = ClassSchedule::with_defaults(InstanceSpace::Unit, ValueSpace::UnitReal);
        let class = s.class(30).unwrap();
        for j in 0..class.len() {
            let f = class.simple_function(j);
            for k in 0..=64 {
                let x = Point::Real(k as f64 / 64.0);
                assert_eq!(class.eval(j, &x), f.eval(&x).unwrap());
            }
        }
    }
}
