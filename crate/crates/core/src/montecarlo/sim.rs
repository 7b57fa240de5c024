use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::allocation::{allocate_with_index, assign_poses, FinalTargetRule, ReachIndex};
use super::collisions::{count_collisions, CollisionCount};
use super::targets::{gen_targets, TargetDistribution};
use super::wilson::wilson_interval;
use super::SimError;
use crate::array::HexArray;
use crate::distance::Kernel;
use crate::geometry::{ArmGeometry, Elbow, SafetyModel};
use crate::seed::derive_seed;

/// Iterations run between checks of the optional early stop.
const EARLY_STOP_CHUNK: u64 = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub pitch: f64,
    pub rings: usize,
    pub geom: ArmGeometry,
    pub safety: SafetyModel,
    pub iterations_max: u64,
    /// Normal quantile of the Wilson interval.
    pub z: f64,
    pub target_count: usize,
    pub region_radius: f64,
    pub distribution: TargetDistribution,
    pub root_seed: u64,
    pub kernel: Kernel,
    pub elbow: Elbow,
    pub final_target: FinalTargetRule,
    /// Stop once the Wilson half-width drops to this value. Checked every
    /// 250 iterations so the result does not depend on scheduling.
    pub early_stop_half_width: Option<f64>,
}

impl SimConfig {
    /// The 19-positioner small-array setup: base arm 8.25 mm, 20000 targets
    /// on a 76.8 mm disk.
    pub fn small_array(ratio: f64, pitch: f64) -> Result<Self, SimError> {
        Ok(Self {
            pitch,
            rings: 2,
            geom: ArmGeometry::from_ratio(8.25, ratio)?,
            safety: SafetyModel::default(),
            iterations_max: 6000,
            z: 1.96,
            target_count: 20_000,
            region_radius: 76.8,
            distribution: TargetDistribution::UniformFixedCount,
            root_seed: 0,
            kernel: Kernel::default(),
            elbow: Elbow::Right,
            final_target: FinalTargetRule::default(),
            early_stop_half_width: None,
        })
    }

    /// The 469-positioner large-array setup: 20000 targets on a 200 mm disk.
    pub fn large_array(arm: f64, ratio: f64, pitch: f64) -> Result<Self, SimError> {
        Ok(Self {
            rings: 12,
            geom: ArmGeometry::from_ratio(arm, ratio)?,
            region_radius: 200.0,
            ..Self::small_array(ratio, pitch)?
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.iterations_max == 0 {
            return Err(SimError::InvalidParameter("iterations must be at least 1".into()));
        }
        if !(self.z.is_finite() && self.z > 0.0) {
            return Err(SimError::InvalidParameter(format!("z must be positive, got {}", self.z)));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(SimError::InvalidParameter(format!(
                "pitch must be positive, got {}",
                self.pitch
            )));
        }
        if !(self.safety.threshold.is_finite() && self.safety.threshold >= 0.0) {
            return Err(SimError::InvalidParameter(format!(
                "threshold must be non-negative, got {}",
                self.safety.threshold
            )));
        }
        if let Some(w) = self.early_stop_half_width {
            if !(w.is_finite() && w > 0.0) {
                return Err(SimError::InvalidParameter(format!(
                    "early-stop half-width must be positive, got {w}"
                )));
            }
        }
        self.kernel.validate()?;
        Ok(())
    }
}

/// Pooled Monte Carlo result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionStats {
    /// Colliding positioners over assigned positioners, pooled over iterations.
    pub p_hat: f64,
    pub wilson_lower: f64,
    pub wilson_upper: f64,
    /// Midpoint of the Wilson bounds.
    pub reported: f64,
    pub iterations: u64,
    pub colliding_pair_count: u64,
    pub colliding_positioner_count: u64,
    pub assigned_positioner_count: u64,
    pub evaluated_pair_count: u64,
    /// Colliding pairs over evaluated pairs.
    pub pair_proportion: f64,
    pub iterations_with_collision: u64,
}

impl CollisionStats {
    pub fn half_width(&self) -> f64 {
        (self.wilson_upper - self.wilson_lower) / 2.0
    }
}

/// Neighbor cutoff for collision counting: wide enough for every pair whose
/// arms can come within the threshold, and never narrower than the inflated
/// patrol-disk cutoff.
pub fn collision_cutoff(geom: &ArmGeometry, safety: &SafetyModel) -> f64 {
    (2.0 * (geom.reach_max() + safety.d)).max(2.0 * geom.reach_max() + safety.threshold)
}

#[derive(Default, Clone, Copy)]
struct Tally {
    count: CollisionCount,
    with_collision: u64,
}

impl std::ops::Add for Tally {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            count: self.count + o.count,
            with_collision: self.with_collision + o.with_collision,
        }
    }
}

pub fn run_simulation(config: &SimConfig) -> Result<CollisionStats, SimError> {
    run_simulation_with(config, &AtomicBool::new(false))
}

/// Runs the simulation, giving up with [`SimError::Interrupted`] once
/// `cancel` is raised.
///
/// Iteration `k` draws its targets from `derive_seed(root_seed, k)` and all
/// counters are integers, so the result is identical for any thread count.
pub fn run_simulation_with(config: &SimConfig, cancel: &AtomicBool) -> Result<CollisionStats, SimError> {
    config.validate()?;
    let array = HexArray::build(config.pitch, config.rings, config.geom, config.safety)?;
    let extent = array.circumradius() + config.geom.reach_max();
    if config.region_radius <= extent {
        log::warn!(
            "target region radius {} mm does not cover the patrol extent {:.3} mm; edge positioners see fewer targets",
            config.region_radius,
            extent
        );
    }
    let neighbors = array.neighbor_pairs(collision_cutoff(&config.geom, &config.safety));
    let index = ReachIndex::new(&array);

    let iteration = |k: u64| -> Result<Tally, SimError> {
        if cancel.load(Ordering::Relaxed) {
            return Ok(Tally::default());
        }
        let seed = derive_seed(config.root_seed, k);
        let field = gen_targets(config.distribution, config.region_radius, config.target_count, seed)?;
        let assignment = allocate_with_index(&array, &index, &field, config.final_target, derive_seed(seed, 0));
        let poses = assign_poses(&array, &field, &assignment, config.elbow)?;
        let count = count_collisions(&array, &neighbors, &poses, config.safety.threshold, config.kernel);
        Ok(Tally {
            count,
            with_collision: u64::from(count.colliding_pairs > 0),
        })
    };

    let chunk = match config.early_stop_half_width {
        Some(_) => EARLY_STOP_CHUNK,
        None => config.iterations_max,
    };
    let mut tally = Tally::default();
    let mut done = 0;
    let mut stats;
    loop {
        let end = (done + chunk).min(config.iterations_max);
        tally = tally
            + (done..end)
                .into_par_iter()
                .map(iteration)
                .try_reduce(Tally::default, |a, b| Ok(a + b))?;
        done = end;
        if cancel.load(Ordering::Relaxed) {
            return Err(SimError::Interrupted);
        }
        stats = summarize(&tally, done, config.z)?;
        let converged = config
            .early_stop_half_width
            .is_some_and(|w| stats.half_width() <= w);
        if done == config.iterations_max || converged {
            break;
        }
    }
    Ok(stats)
}

fn summarize(tally: &Tally, iterations: u64, z: f64) -> Result<CollisionStats, SimError> {
    let c = &tally.count;
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let p_hat = ratio(c.colliding_positioners, c.assigned_positioners);
    let (wilson_lower, wilson_upper) = wilson_interval(p_hat, iterations, z)?;
    Ok(CollisionStats {
        p_hat,
        wilson_lower,
        wilson_upper,
        reported: (wilson_lower + wilson_upper) / 2.0,
        iterations,
        colliding_pair_count: c.colliding_pairs,
        colliding_positioner_count: c.colliding_positioners,
        assigned_positioner_count: c.assigned_positioners,
        evaluated_pair_count: c.evaluated_pairs,
        pair_proportion: ratio(c.colliding_pairs, c.evaluated_pairs),
        iterations_with_collision: tally.with_collision,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(ratio: f64, pitch: f64, iters: u64) -> SimConfig {
        SimConfig {
            iterations_max: iters,
            target_count: 2_000,
            root_seed: 11,
            ..SimConfig::small_array(ratio, pitch).unwrap()
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cfg = SimConfig {
            final_target: FinalTargetRule::Random,
            ..quick(2.5, 25.6, 64)
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_simulation(&cfg).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(3));
        assert_eq!(a, run_simulation(&cfg).unwrap());
        assert!(a.colliding_pair_count > 0);
    }

    #[test]
    fn type1_reports_half_the_zero_upper_bound() {
        let cfg = quick(1.0, 50.0, 300);
        let s = run_simulation(&cfg).unwrap();
        assert_eq!(s.p_hat, 0.0);
        assert_eq!(s.colliding_pair_count, 0);
        let z2 = 1.96f64 * 1.96;
        assert!((s.reported - z2 / (300.0 + z2) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn stats_are_consistent() {
        let cfg = SimConfig {
            final_target: FinalTargetRule::Random,
            ..quick(3.0, 25.6, 40)
        };
        let s = run_simulation(&cfg).unwrap();
        assert!(s.wilson_lower <= s.p_hat && s.p_hat <= s.wilson_upper);
        assert_eq!(s.reported, (s.wilson_lower + s.wilson_upper) / 2.0);
        assert!(s.colliding_positioner_count <= s.assigned_positioner_count);
        assert!(s.colliding_pair_count <= s.evaluated_pair_count);
        assert!(s.assigned_positioner_count <= 19 * 40);
        assert!(s.iterations_with_collision <= 40);
    }

    #[test]
    fn early_stop_lands_on_chunk_boundary() {
        let cfg = SimConfig {
            early_stop_half_width: Some(0.05),
            ..quick(1.0, 35.0, 6000)
        };
        let s = run_simulation(&cfg).unwrap();
        assert_eq!(s.iterations % EARLY_STOP_CHUNK, 0);
        assert!(s.iterations < 6000);
        assert!(s.half_width() <= 0.05);
    }

    #[test]
    fn cancelled_run_reports_interrupt() {
        let cancel = AtomicBool::new(true);
        assert!(matches!(
            run_simulation_with(&quick(1.0, 25.6, 10), &cancel),
            Err(SimError::Interrupted)
        ));
    }

    #[test]
    fn invalid_configs_fail_up_front() {
        assert!(run_simulation(&SimConfig { iterations_max: 0, ..quick(1.0, 25.6, 1) }).is_err());
        assert!(run_simulation(&SimConfig { pitch: 0.0, ..quick(1.0, 25.6, 1) }).is_err());
        assert!(run_simulation(&SimConfig { z: -1.0, ..quick(1.0, 25.6, 1) }).is_err());
        assert!(run_simulation(&SimConfig { kernel: Kernel::Discrete(1), ..quick(1.0, 25.6, 1) }).is_err());
    }
}
