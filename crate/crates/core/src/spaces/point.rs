use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// The two instance spaces every construction in the lab lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSpace {
    /// The closed unit interval `[0, 1]`.
    Unit,
    /// The natural numbers `{0, 1, 2, ...}`.
    Nat,
}

impl fmt::Display for InstanceSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceSpace::Unit => write!(f, "unit"),
            InstanceSpace::Nat => write!(f, "nat"),
        }
    }
}

/// A point of an instance space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Real(f64),
    Nat(u64),
}

impl Point {
    /// Builds a unit-interval point, rejecting payloads outside `[0, 1]`.
    pub fn real(x: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&x) {
            Ok(Point::Real(x))
        } else {
            Err(LabError::usage(format!("real point {x} outside [0,1]")))
        }
    }

    pub fn space(&self) -> InstanceSpace {
        match self {
            Point::Real(_) => InstanceSpace::Unit,
            Point::Nat(_) => InstanceSpace::Nat,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Point::Real(x) => Some(x),
            Point::Nat(_) => None,
        }
    }

    pub fn as_nat(&self) -> Option<u64> {
        match *self {
            Point::Nat(k) => Some(k),
            Point::Real(_) => None,
        }
    }

    /// Hashable identity of the point (bit pattern for reals).
    pub fn key(&self) -> PointKey {
        match *self {
            // -0.0 and 0.0 are the same point
            Point::Real(x) => PointKey::Real((x + 0.0).to_bits()),
            Point::Nat(k) => PointKey::Nat(k),
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Real(x) => write!(f, "{x}"),
            Point::Nat(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PointKey {
    Real(u64),
    Nat(u64),
}

/// Exact comparison of a float sample against a rational endpoint.
///
/// The float comparison against the nearest float of `r` decides every case
/// except equality with that float; only then is exact big-rational
/// arithmetic used.
pub fn cmp_real_rational(x: f64, r: &Rational64) -> Ordering {
    let approx = r.to_f64().unwrap_or(f64::NAN);
    match x.partial_cmp(&approx) {
        Some(Ordering::Equal) | None => {
            let exact_x = BigRational::from_float(x).expect("finite sample");
            let exact_r = BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
            exact_x.cmp(&exact_r)
        }
        Some(ord) => ord,
    }
}
