//! Monte Carlo estimate of the static collision probability: scatter targets,
//! allocate them, pose the arms and count colliding neighbors.

mod allocation;
mod collisions;
mod sim;
mod targets;
mod wilson;

pub use allocation::{
    allocate_targets, allocate_with_index, assign_poses, Assignment, FinalTargetRule, ReachIndex,
};
pub use collisions::{count_collisions, CollisionCount};
pub use sim::{collision_cutoff, run_simulation, run_simulation_with, CollisionStats, SimConfig};
pub use targets::{
    gen_targets, TargetDistribution, TargetField, POISSON_DISK_ATTEMPTS_PER_POINT,
    POISSON_DISK_ETA,
};
pub use wilson::wilson_interval;

use crate::array::ArrayError;
use crate::geometry::GeometryError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error("interrupted")]
    Interrupted,
}
