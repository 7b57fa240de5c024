use std::collections::HashMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::Point;
use crate::seed::rng_from_seed;

/// Packing parameter of the Poisson-disk field: `r_min = R √(η / count)`.
pub const POISSON_DISK_ETA: f64 = 0.75;
/// Dart-throwing gives up after this many attempts per requested point.
pub const POISSON_DISK_ATTEMPTS_PER_POINT: usize = 30;

/// How sky targets are scattered over the target disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TargetDistribution {
    /// Exactly `count` i.i.d. uniform points.
    #[default]
    UniformFixedCount,
    /// Homogeneous Poisson process with mean `count`.
    PoissonProcess,
    /// Uniform dart throwing with a minimum separation.
    PoissonDisk,
}

impl std::str::FromStr for TargetDistribution {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::UniformFixedCount),
            "poisson" | "poisson-process" => Ok(Self::PoissonProcess),
            "poisson-disk" | "poisson_disk" => Ok(Self::PoissonDisk),
            other => Err(format!(
                "unknown distribution '{other}' (expected uniform|poisson|poisson-disk)"
            )),
        }
    }
}

impl std::fmt::Display for TargetDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::UniformFixedCount => "uniform",
            Self::PoissonProcess => "poisson",
            Self::PoissonDisk => "poisson-disk",
        })
    }
}

/// A generated set of sky targets on the disk of `region_radius` around the
/// array origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetField {
    pub points: Vec<Point>,
    pub distribution: TargetDistribution,
    pub region_radius: f64,
    pub count: usize,
    pub seed: u64,
}

#[inline]
fn uniform_in_disk<R: Rng>(rng: &mut R, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let t = TAU * rng.random::<f64>();
    Point::unit(t) * r
}

/// Generates a target field. The output is a pure function of the arguments.
pub fn gen_targets(
    distribution: TargetDistribution,
    region_radius: f64,
    count: usize,
    seed: u64,
) -> Result<TargetField, SimError> {
    if !(region_radius.is_finite() && region_radius > 0.0) {
        return Err(SimError::InvalidParameter(format!(
            "target region radius must be positive, got {region_radius}"
        )));
    }
    if count == 0 {
        return Err(SimError::InvalidParameter(
            "target count must be at least 1".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let points = match distribution {
        TargetDistribution::UniformFixedCount => (0..count)
            .map(|_| uniform_in_disk(&mut rng, region_radius))
            .collect(),
        TargetDistribution::PoissonProcess => {
            let total = Poisson::new(count as f64)
                .expect("positive mean")
                .sample(&mut rng) as usize;
            (0..total)
                .map(|_| uniform_in_disk(&mut rng, region_radius))
                .collect()
        }
        TargetDistribution::PoissonDisk => poisson_disk(&mut rng, region_radius, count),
    };
    Ok(TargetField {
        points,
        distribution,
        region_radius,
        count,
        seed,
    })
}

fn poisson_disk<R: Rng>(rng: &mut R, radius: f64, count: usize) -> Vec<Point> {
    let r_min = radius * (POISSON_DISK_ETA / count as f64).sqrt();
    let r_min_sq = r_min * r_min;
    // cells of side r_min: any point closer than r_min lies in the 3x3 neighborhood
    let cell = r_min;
    let key = |p: Point| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::with_capacity(count);
    let mut points: Vec<Point> = Vec::with_capacity(count);
    let max_attempts = POISSON_DISK_ATTEMPTS_PER_POINT * count;
    let mut attempts = 0;
    while points.len() < count && attempts < max_attempts {
        attempts += 1;
        let p = uniform_in_disk(rng, radius);
        let (cx, cy) = key(p);
        let blocked = (cx - 1..=cx + 1).any(|gx| {
            (cy - 1..=cy + 1).any(|gy| {
                grid.get(&(gx, gy)).is_some_and(|bucket| {
                    bucket
                        .iter()
                        .any(|&k| (points[k as usize] - p).norm_sq() < r_min_sq)
                })
            })
        });
        if !blocked {
            grid.entry((cx, cy)).or_default().push(points.len() as u32);
            points.push(p);
        }
    }
    points
}
