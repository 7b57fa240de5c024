use rand::Rng;
use serde::{Deserialize, Serialize};

use super::targets::TargetField;
use crate::array::HexArray;
use crate::geometry::{inverse_kinematics, Elbow, GeometryError, Point, Pose};
use crate::seed::rng_from_seed;

/// Which of its assigned targets a positioner finally moves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FinalTargetRule {
    /// The assigned target closest to the positioner center. With dense
    /// fields this leaves nearly every arm folded toward its own center.
    Nearest,
    /// A uniformly random assigned target, drawn from a per-iteration stream,
    /// so final tip positions spread over the whole patrol area.
    #[default]
    Random,
}

impl std::str::FromStr for FinalTargetRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nearest" => Ok(Self::Nearest),
            "random" => Ok(Self::Random),
            other => Err(format!("unknown final-target rule '{other}' (expected nearest|random)")),
        }
    }
}

impl std::fmt::Display for FinalTargetRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Nearest => "nearest",
            Self::Random => "random",
        })
    }
}

/// Target-to-positioner mapping for one simulated exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Target indices per positioner, in allocation order.
    pub per_positioner_targets: Vec<Vec<usize>>,
    /// Target each positioner finally moves to.
    pub final_target: Vec<Option<usize>>,
    /// Positioners without any target ("following" positioners), ascending.
    pub unassigned_positioners: Vec<usize>,
    /// Targets nobody can reach.
    pub dropped_targets: usize,
}

impl Assignment {
    pub fn assigned_count(&self) -> usize {
        self.final_target.iter().filter(|t| t.is_some()).count()
    }
}

/// Uniform grid over positioner centers with cell size `reach_max`, so all
/// positioners able to reach a point sit in its 3x3 cell neighborhood.
#[derive(Debug, Clone)]
pub struct ReachIndex {
    origin: Point,
    cell: f64,
    nx: i64,
    ny: i64,
    start: Vec<u32>,
    members: Vec<u32>,
}

impl ReachIndex {
    pub fn new(array: &HexArray) -> Self {
        let cell = array.geom().reach_max();
        let centers = array.centers();
        let (mut lo, mut hi) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
        for c in centers {
            lo = Point::new(lo.x.min(c.x), lo.y.min(c.y));
            hi = Point::new(hi.x.max(c.x), hi.y.max(c.y));
        }
        let nx = ((hi.x - lo.x) / cell).floor() as i64 + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as i64 + 1;
        let cell_id = |c: &Point| {
            let gx = ((c.x - lo.x) / cell).floor() as i64;
            let gy = ((c.y - lo.y) / cell).floor() as i64;
            (gy * nx + gx) as usize
        };
        let mut counts = vec![0u32; (nx * ny) as usize + 1];
        for c in centers {
            counts[cell_id(c) + 1] += 1;
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut members = vec![0u32; centers.len()];
        for (idx, c) in centers.iter().enumerate() {
            let slot = &mut fill[cell_id(c)];
            members[*slot as usize] = idx as u32;
            *slot += 1;
        }
        Self {
            origin: lo,
            cell,
            nx,
            ny,
            start: counts,
            members,
        }
    }

    /// Calls `f(positioner, distance)` for each positioner that can reach `p`,
    /// in ascending positioner order within each cell.
    #[inline]
    pub fn for_each_reaching<F: FnMut(usize, f64)>(&self, array: &HexArray, p: Point, mut f: F) {
        let geom = array.geom();
        let centers = array.centers();
        // cheap squared-distance reject ahead of the exact predicate
        let outer = geom.reach_max() * (1.0 + 1e-9);
        let outer_sq = outer * outer;
        let gx = ((p.x - self.origin.x) / self.cell).floor() as i64;
        let gy = ((p.y - self.origin.y) / self.cell).floor() as i64;
        for y in (gy - 1).max(0)..=(gy + 1).min(self.ny - 1) {
            for x in (gx - 1).max(0)..=(gx + 1).min(self.nx - 1) {
                let id = (y * self.nx + x) as usize;
                for &m in &self.members[self.start[id] as usize..self.start[id + 1] as usize] {
                    let dist_sq = (centers[m as usize] - p).norm_sq();
                    if dist_sq > outer_sq {
                        continue;
                    }
                    let dist = dist_sq.sqrt();
                    if geom.reaches(dist) {
                        f(m as usize, dist);
                    }
                }
            }
        }
    }
}

/// Allocates every target to a positioner.
///
/// Targets are visited in order of their distance to the nearest positioner
/// that can reach them (ties by target index). Each goes to the reaching
/// positioner with the fewest targets so far, then the closest one, then the
/// lowest index. Unreachable targets are dropped. Each positioner finally
/// moves to its nearest assigned target.
pub fn allocate_targets(array: &HexArray, field: &TargetField) -> Assignment {
    allocate_with_index(array, &ReachIndex::new(array), field, FinalTargetRule::Nearest, 0)
}

/// [`allocate_targets`] with a prebuilt index and a choice of final-target
/// rule. `pick_seed` only matters for [`FinalTargetRule::Random`].
pub fn allocate_with_index(
    array: &HexArray,
    index: &ReachIndex,
    field: &TargetField,
    rule: FinalTargetRule,
    pick_seed: u64,
) -> Assignment {
    let n_pos = array.len();
    let n_tgt = field.points.len();

    // CSR candidate lists
    let mut cand_start = Vec::with_capacity(n_tgt + 1);
    let mut cand: Vec<(u32, f64)> = Vec::with_capacity(n_tgt * 4);
    // (distance bits, index): non-negative floats order like their bit patterns
    let mut order: Vec<u128> = Vec::with_capacity(n_tgt);
    cand_start.push(0u32);
    for (t, &p) in field.points.iter().enumerate() {
        let mut nearest = f64::INFINITY;
        index.for_each_reaching(array, p, |m, dist| {
            cand.push((m as u32, dist));
            nearest = nearest.min(dist);
        });
        cand_start.push(cand.len() as u32);
        if nearest.is_finite() {
            order.push(((nearest.to_bits() as u128) << 32) | t as u128);
        }
    }
    let dropped_targets = n_tgt - order.len();
    order.sort_unstable();

    let mut per_positioner_targets: Vec<Vec<usize>> = vec![Vec::new(); n_pos];
    let mut load = vec![0u32; n_pos];
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n_pos];
    for &key in &order {
        let t = (key & 0xFFFF_FFFF) as usize;
        let choices = &cand[cand_start[t] as usize..cand_start[t + 1] as usize];
        let &(m, dist) = choices
            .iter()
            .min_by(|a, b| {
                load[a.0 as usize]
                    .cmp(&load[b.0 as usize])
                    .then(a.1.total_cmp(&b.1))
                    .then(a.0.cmp(&b.0))
            })
            .expect("ordered targets have candidates");
        let m = m as usize;
        load[m] += 1;
        per_positioner_targets[m].push(t);
        let closer = match best[m] {
            None => true,
            Some((bd, bt)) => dist < bd || (dist == bd && t < bt),
        };
        if closer {
            best[m] = Some((dist, t));
        }
    }

    let final_target: Vec<Option<usize>> = match rule {
        FinalTargetRule::Nearest => best.iter().map(|b| b.map(|(_, t)| t)).collect(),
        FinalTargetRule::Random => {
            let mut rng = rng_from_seed(pick_seed);
            per_positioner_targets
                .iter()
                .map(|list| (!list.is_empty()).then(|| list[rng.random_range(0..list.len())]))
                .collect()
        }
    };
    let unassigned_positioners = (0..n_pos).filter(|&m| final_target[m].is_none()).collect();
    Assignment {
        per_positioner_targets,
        final_target,
        unassigned_positioners,
        dropped_targets,
    }
}

/// Inverse kinematics toward each positioner's final target; positioners
/// without a target get no pose.
pub fn assign_poses(
    array: &HexArray,
    field: &TargetField,
    assignment: &Assignment,
    elbow: Elbow,
) -> Result<Vec<Option<Pose>>, GeometryError> {
    array
        .centers()
        .iter()
        .zip(&assignment.final_target)
        .map(|(&center, target)| {
            target
                .map(|t| inverse_kinematics(array.geom(), center, field.points[t], elbow))
                .transpose()
        })
        .collect()
}
