//! Instance spaces, value spaces and losses, measurable sets, and simple
//! functions.

pub mod loss;
pub mod point;
pub mod set;
pub mod simple;

pub use loss::{LossKind, LossSpace, Value, ValueSpace};
pub use point::{InstanceSpace, Point, PointKey};
pub use set::{Interval, MeasurableSet};
pub use simple::{is_partition, partition_refine, Partition, SimpleFunction};
