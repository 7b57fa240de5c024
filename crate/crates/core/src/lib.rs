//! Static collision probability of theta-phi fiber positioner arrays.
//!
//! The crate has two estimators for the same quantity. [`analytic`] sums a
//! closed-form area ratio over lattice neighbor shells. [`montecarlo`]
//! scatters targets, allocates them, poses every arm and counts close pairs.
//! [`regression`] fits a quadratic surrogate over sweeps of either, and
//! [`batch`] is the parallel distance kernel used for large arrays.

pub mod analytic;
pub mod array;
pub mod batch;
pub mod distance;
pub mod geometry;
pub mod montecarlo;
pub mod regression;
pub mod seed;
pub mod sweep;

pub use analytic::{collision_probability_analytic, collision_probability_with_cover, AnalyticResult, CoverMode};
pub use array::{HexArray, InteractionType, NeighborIndex};
pub use distance::Kernel;
pub use geometry::{ArmGeometry, Elbow, Point, Pose, SafetyModel, Segment};
pub use montecarlo::{run_simulation, CollisionStats, SimConfig, TargetDistribution};
