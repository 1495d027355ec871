use serde::{Deserialize, Serialize};

use super::loss::Value;
use super::point::{InstanceSpace, Point};
use super::set::MeasurableSet;
use crate::error::{LabError, Result};

/// A finite partition of an instance space into measurable cells.
pub type Partition = Vec<MeasurableSet>;

/// Finitely many values, each on a measurable cell; the default covers the
/// remainder of the space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleFunction {
    space: InstanceSpace,
    cells: Vec<(MeasurableSet, Value)>,
    default: Value,
}

impl SimpleFunction {
    /// Builds a simple function, rejecting overlapping or mismatched cells.
    pub fn new(space: InstanceSpace, cells: Vec<(MeasurableSet, Value)>, default: Value) -> Result<Self> {
        let mut seen = MeasurableSet::empty(space);
        for (cell, _) in &cells {
            if cell.space() != space {
                return Err(LabError::usage(format!("cell {cell} not in instance space {space}")));
            }
            if !seen.intersect(cell)?.is_empty() {
                return Err(LabError::usage(format!("cell {cell} overlaps an earlier cell")));
            }
            seen = seen.union(cell)?;
        }
        let cells = cells.into_iter().filter(|(c, _)| !c.is_empty()).collect();
        Ok(SimpleFunction { space, cells, default })
    }

    pub fn constant(space: InstanceSpace, value: Value) -> Self {
        SimpleFunction {
            space,
            cells: Vec::new(),
            default: value,
        }
    }

    pub fn space(&self) -> InstanceSpace {
        self.space
    }

    pub fn cells(&self) -> &[(MeasurableSet, Value)] {
        &self.cells
    }

    pub fn default_value(&self) -> Value {
        self.default
    }

    pub fn eval(&self, x: &Point) -> Result<Value> {
        for (cell, v) in &self.cells {
            if cell.contains(x)? {
                return Ok(*v);
            }
        }
        if x.space() != self.space {
            return Err(LabError::usage(format!("point {x} not in instance space {}", self.space)));
        }
        Ok(self.default)
    }

    /// The full partition this function is constant on: its cells plus the
    /// uncovered remainder (when nonempty), each with its value.
    pub fn pieces(&self) -> Vec<(MeasurableSet, Value)> {
        let mut covered = MeasurableSet::empty(self.space);
        let mut out = Vec::with_capacity(self.cells.len() + 1);
        for (cell, v) in &self.cells {
            covered = covered.union(cell).expect("same space");
            out.push((cell.clone(), *v));
        }
        let rest = covered.complement();
        if !rest.is_empty() {
            out.push((rest, self.default));
        }
        out
    }

    pub fn partition(&self) -> Partition {
        self.pieces().into_iter().map(|(c, _)| c).collect()
    }

    /// Rewrites this function over a refinement of its partition.
    pub fn on_partition(&self, partition: &Partition) -> Result<SimpleFunction> {
        let mut cells = Vec::with_capacity(partition.len());
        for cell in partition {
            let v = self.value_on(cell)?;
            cells.push((cell.clone(), v));
        }
        SimpleFunction::new(self.space, cells, self.default)
    }

    /// The value taken on a nonempty cell that lies inside a single piece.
    fn value_on(&self, cell: &MeasurableSet) -> Result<Value> {
        for (piece, v) in self.pieces() {
            if !piece.intersect(cell)?.is_empty() {
                if !cell.is_subset_of(&piece)? {
                    return Err(LabError::usage(format!("cell {cell} straddles piece {piece}")));
                }
                return Ok(v);
            }
        }
        Err(LabError::usage(format!("cell {cell} is empty")))
    }
}

/// Common refinement of two partitions: every nonempty pairwise intersection,
/// ordered by least element.
pub fn partition_refine(p1: &Partition, p2: &Partition) -> Result<Partition> {
    let mut out = Vec::new();
    for a in p1 {
        for b in p2 {
            let c = a.intersect(b)?;
            if !c.is_empty() {
                out.push(c);
            }
        }
    }
    out.sort_by_key(|c| c.order_key());
    Ok(out)
}

/// Checks that the cells are pairwise disjoint and cover the space.
pub fn is_partition(p: &Partition, space: InstanceSpace) -> bool {
    let mut covered = MeasurableSet::empty(space);
    for cell in p {
        if cell.space() != space {
            return false;
        }
        match covered.intersect(cell) {
            Ok(c) if c.is_empty() => {}
            _ => return false,
        }
        covered = covered.union(cell).expect("same space");
    }
    covered == MeasurableSet::full(space)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(s: &str) -> MeasurableSet {
        s.parse().unwrap()
    }

    fn half_indicator() -> SimpleFunction {
        SimpleFunction::new(InstanceSpace::Unit, vec![(set("[0,1/2)"), 1.0)], 0.0).unwrap()
    }

    #[test]
    fn eval_uses_covering_cell_then_default() {
        let f = half_indicator();
        assert_eq!(f.eval(&Point::Real(0.25)).unwrap(), 1.0);
        assert_eq!(f.eval(&Point::Real(0.75)).unwrap(), 0.0);
        assert!(f.eval(&Point::Nat(3)).is_err());
    }

    #[test]
    fn overlapping_cells_are_rejected() {
        let r = SimpleFunction::new(
            InstanceSpace::Unit,
            vec![(set("[0,1/2)"), 1.0), (set("[1/4,3/4)"), 0.0)],
            0.0,
        );
        assert!(r.is_err());
    }

    #[test]
    fn cell_order_does_not_change_values() {
        let cells = vec![(set("[0,1/4)"), 1.0), (set("[1/2,3/4)"), 0.5), (set("[3/4,1]"), 0.25)];
        let f = SimpleFunction::new(InstanceSpace::Unit, cells.clone(), 0.0).unwrap();
        let mut rev = cells;
        rev.reverse();
        let g = SimpleFunction::new(InstanceSpace::Unit, rev, 0.0).unwrap();
        for k in 0..=100 {
            let x = Point::Real(k as f64 / 100.0);
            assert_eq!(f.eval(&x).unwrap(), g.eval(&x).unwrap());
        }
    }

    #[test]
    fn refinement_of_stated_partitions() {
        let p1 = vec![set("[0,1/2)"), set("[1/2,1]")];
        let p2 = vec![set("[0,1/4)"), set("[1/4,1]")];
        let r = partition_refine(&p1, &p2).unwrap();
        assert_eq!(r, vec![set("[0,1/4)"), set("[1/4,1/2)"), set("[1/2,1]")]);
        assert_eq!(partition_refine(&p1, &p1).unwrap(), p1);
    }

    #[test]
    fn pieces_include_remainder() {
        let f = half_indicator();
        assert_eq!(f.partition(), vec![set("[0,1/2)"), set("[1/2,1]")]);
        assert!(is_partition(&f.partition(), InstanceSpace::Unit));
        let g = SimpleFunction::new(InstanceSpace::Nat, vec![(set("{0,2}"), 1.0)], 0.0).unwrap();
        assert_eq!(g.partition(), vec![set("{0,2}"), set("~{0,2}")]);
    }

    #[test]
    fn rewriting_on_a_refinement_preserves_values() {
        let f = half_indicator();
        let p = vec![set("[0,1/4)"), set("[1/4,1/2)"), set("[1/2,1]")];
        let g = f.on_partition(&p).unwrap();
        assert_eq!(g.cells().len(), 3);
        for k in 0..=20 {
            let x = Point::Real(k as f64 / 20.0);
            assert_eq!(f.eval(&x).unwrap(), g.eval(&x).unwrap());
        }
        assert!(f.on_partition(&vec![set("[1/4,3/4)")]).is_err());
    }
}
