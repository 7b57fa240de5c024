//! Hexagonal positioner arrays, neighbor enumeration and interaction classes.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ArmGeometry, Point, SafetyModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrayError {
    #[error("{0}")]
    InvalidParameter(String),
}

/// Axial hex directions, starting along +x and turning counter-clockwise.
const AXIAL_DIRECTIONS: [(i64, i64); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// Number of positioners in a centered hexagon with `rings` rings.
pub fn hex_count(rings: usize) -> usize {
    3 * rings * (rings + 1) + 1
}

/// Smallest ring count whose centered hexagon holds at least `count` cells.
pub fn rings_for_count(count: usize) -> usize {
    let mut rings = 0;
    while hex_count(rings) < count {
        rings += 1;
    }
    rings
}

/// Axial coordinates of a centered hexagon in spiral order: origin first, then
/// ring by ring, each ring starting at axial `(0, -k)` and walked
/// counter-clockwise.
pub fn spiral_axial(rings: usize) -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(hex_count(rings));
    out.push((0, 0));
    for k in 1..=rings as i64 {
        // start k steps along direction 4, then walk each direction k times
        let (dq, dr) = AXIAL_DIRECTIONS[4];
        let (mut q, mut r) = (dq * k, dr * k);
        for &(sq, sr) in &AXIAL_DIRECTIONS {
            for _ in 0..k {
                out.push((q, r));
                q += sq;
                r += sr;
            }
        }
    }
    out
}

/// Cartesian position of an axial coordinate; lattice vectors are
/// `pitch * (1, 0)` and `pitch * (1/2, √3/2)`.
#[inline]
pub fn axial_to_point(q: i64, r: i64, pitch: f64) -> Point {
    let (q, r) = (q as f64, r as f64);
    Point::new(pitch * (q + 0.5 * r), pitch * (0.75f64.sqrt() * r))
}

/// Positioners on a regular hexagonal patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HexArray {
    pitch: f64,
    rings: usize,
    centers: Vec<Point>,
    geom: ArmGeometry,
    safety: SafetyModel,
}

impl HexArray {
    pub fn build(
        pitch: f64,
        rings: usize,
        geom: ArmGeometry,
        safety: SafetyModel,
    ) -> Result<Self, ArrayError> {
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(ArrayError::InvalidParameter(format!(
                "pitch must be positive, got {pitch}"
            )));
        }
        let centers = spiral_axial(rings)
            .into_iter()
            .map(|(q, r)| axial_to_point(q, r, pitch))
            .collect();
        Ok(Self {
            pitch,
            rings,
            centers,
            geom,
            safety,
        })
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn rings(&self) -> usize {
        self.rings
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn geom(&self) -> &ArmGeometry {
        &self.geom
    }

    pub fn safety(&self) -> &SafetyModel {
        &self.safety
    }

    /// Distance from the origin to the farthest positioner center.
    pub fn circumradius(&self) -> f64 {
        self.rings as f64 * self.pitch
    }

    /// Default broad-phase cutoff `2 (l1 + l2 + d)`: beyond it the inflated
    /// patrol disks cannot touch.
    pub fn default_cutoff(&self) -> f64 {
        2.0 * (self.geom.reach_max() + self.safety.d)
    }

    pub fn neighbor_pairs(&self, cutoff: f64) -> NeighborIndex {
        neighbor_pairs_of(&self.centers, cutoff)
    }

    /// Number of positioners whose (uninflated) patrol annulus contains `p`.
    pub fn coverage_multiplicity(&self, p: Point) -> usize {
        self.centers
            .iter()
            .filter(|c| {
                let r = c.distance(p);
                r >= self.geom.reach_min() && r <= self.geom.reach_max()
            })
            .count()
    }
}

/// One unordered neighbor pair with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborPair {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

/// All center pairs within `cutoff`, sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborIndex {
    pub pairs: Vec<NeighborPair>,
    pub cutoff: f64,
}

impl NeighborIndex {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Uniform-grid broad phase over an arbitrary center list.
pub fn neighbor_pairs_of(centers: &[Point], cutoff: f64) -> NeighborIndex {
    let mut pairs = Vec::new();
    if !(cutoff > 0.0) || centers.len() < 2 {
        return NeighborIndex { pairs, cutoff };
    }
    let cell_of = |p: Point| ((p.x / cutoff).floor() as i64, (p.y / cutoff).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (idx, &c) in centers.iter().enumerate() {
        grid.entry(cell_of(c)).or_default().push(idx);
    }
    for (i, &ci) in centers.iter().enumerate() {
        let (cx, cy) = cell_of(ci);
        for gx in cx - 1..=cx + 1 {
            for gy in cy - 1..=cy + 1 {
                let Some(bucket) = grid.get(&(gx, gy)) else {
                    continue;
                };
                for &j in bucket {
                    if j <= i {
                        continue;
                    }
                    let distance = ci.distance(centers[j]);
                    if distance <= cutoff {
                        pairs.push(NeighborPair { i, j, distance });
                    }
                }
            }
        }
    }
    pairs.sort_by_key(|p| (p.i, p.j));
    NeighborIndex { pairs, cutoff }
}

/// How far a positioner's collision reach extends into the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InteractionType {
    /// No neighbor can be touched.
    Type1,
    /// Only the first ring of neighbors can be touched.
    Type2,
    /// Reach extends beyond the first ring.
    Type3,
}

/// Classifies by comparing the inflated reach diameter `2 (l1 + l2 + d)` with
/// `pitch` and `2 * pitch`. Equalities fall into the lower-numbered type.
pub fn classify_interaction(geom: &ArmGeometry, safety: &SafetyModel, pitch: f64) -> InteractionType {
    let reach = 2.0 * (geom.reach_max() + safety.d);
    if pitch >= reach {
        InteractionType::Type1
    } else if 2.0 * pitch >= reach {
        InteractionType::Type2
    } else {
        InteractionType::Type3
    }
}

/// A coordination shell of the infinite hexagonal lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeClass {
    pub distance: f64,
    pub multiplicity: usize,
    /// Squared distance in units of pitch², `i² + ij + j²`.
    pub norm: u64,
}

/// Distinct center-to-center distances up to `cutoff` with their
/// coordination numbers, nearest first.
pub fn lattice_neighbor_classes(pitch: f64, cutoff: f64) -> Vec<LatticeClass> {
    if !(pitch > 0.0 && cutoff > 0.0) {
        return Vec::new();
    }
    let span = (cutoff / pitch / 0.75f64.sqrt()).ceil() as i64 + 1;
    let mut shells: BTreeMap<u64, usize> = BTreeMap::new();
    for i in -span..=span {
        for j in -span..=span {
            if i == 0 && j == 0 {
                continue;
            }
            let norm = (i * i + i * j + j * j) as u64;
            let distance = pitch * (norm as f64).sqrt();
            if distance <= cutoff {
                *shells.entry(norm).or_default() += 1;
            }
        }
    }
    shells
        .into_iter()
        .map(|(norm, multiplicity)| LatticeClass {
            distance: pitch * (norm as f64).sqrt(),
            multiplicity,
            norm,
        })
        .collect()
}
