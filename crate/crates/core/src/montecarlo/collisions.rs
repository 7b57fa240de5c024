use serde::{Deserialize, Serialize};

use crate::array::{HexArray, NeighborIndex};
use crate::batch::early_exit_with_kernel;
use crate::distance::Kernel;
use crate::geometry::{eccentric_arm_segment, Pose, Segment};

/// Collision tallies for one set of poses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionCount {
    pub colliding_positioners: u64,
    pub colliding_pairs: u64,
    pub assigned_positioners: u64,
    /// Neighbor pairs where both positioners carry a pose.
    pub evaluated_pairs: u64,
}

impl std::ops::Add for CollisionCount {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            colliding_positioners: self.colliding_positioners + o.colliding_positioners,
            colliding_pairs: self.colliding_pairs + o.colliding_pairs,
            assigned_positioners: self.assigned_positioners + o.assigned_positioners,
            evaluated_pairs: self.evaluated_pairs + o.evaluated_pairs,
        }
    }
}

/// Counts colliding pairs and positioners. A pair collides when its arm
/// distance is below `threshold`; positioners without a pose are skipped.
///
/// `neighbors` must cover every pair that could come within `threshold`,
/// i.e. its cutoff must be at least `2 * reach_max + threshold`.
pub fn count_collisions(
    array: &HexArray,
    neighbors: &NeighborIndex,
    poses: &[Option<Pose>],
    threshold: f64,
    kernel: Kernel,
) -> CollisionCount {
    debug_assert_eq!(poses.len(), array.len());
    let segments: Vec<Option<Segment>> = array
        .centers()
        .iter()
        .zip(poses)
        .map(|(&c, p)| p.map(|p| eccentric_arm_segment(array.geom(), c, p)))
        .collect();
    let mut hit = vec![false; array.len()];
    let mut count = CollisionCount {
        assigned_positioners: segments.iter().filter(|s| s.is_some()).count() as u64,
        ..Default::default()
    };
    for pair in &neighbors.pairs {
        let (Some(s1), Some(s2)) = (&segments[pair.i], &segments[pair.j]) else {
            continue;
        };
        count.evaluated_pairs += 1;
        if early_exit_with_kernel(kernel, s1, s2, threshold).1 {
            count.colliding_pairs += 1;
            hit[pair.i] = true;
            hit[pair.j] = true;
        }
    }
    count.colliding_positioners = hit.iter().filter(|&&h| h).count() as u64;
    count
}
