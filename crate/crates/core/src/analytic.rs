//! Closed-form static collision probability.
//!
//! For every lattice neighbor class within the inflated reach diameter the
//! model multiplies the share of the coverage area that is in conflict with
//! that neighbor by the share that the eccentric arm can sweep into the
//! neighbor's range:
//!
//! ```text
//! P = Σ_class  multiplicity · (S_conflict / S_cover) · (S_collision / S_cover)
//! ```
//!
//! `S_collision` and `S_cover` follow the published closed forms. `S_conflict`
//! has no published closed form; here it is the intersection area of the two
//! inflated patrol annuli, evaluated exactly by inclusion-exclusion over
//! circle-circle lens areas.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{classify_interaction, lattice_neighbor_classes, InteractionType};
use crate::geometry::{ArmGeometry, SafetyModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("pitch must be positive, got {0}")]
    InvalidPitch(f64),
    #[error("coverage area is zero while collision terms are not (d = 0 under the thin-ring cover; use the full-patrol cover)")]
    DegenerateCover,
}

/// How the coverage area `S_cover` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CoverMode {
    /// `π (R_outer² − R_inner²)` with the thin-ring radii of [`ring_radii`].
    #[default]
    PaperLiteral,
    /// The inflated patrol annulus `π ((l1 + l2 + d)² − max(0, l2 − l1 − d)²)`.
    FullPatrol,
}

impl std::str::FromStr for CoverMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" | "paper-literal" | "ring" => Ok(CoverMode::PaperLiteral),
            "full" | "full-patrol" | "patrol" => Ok(CoverMode::FullPatrol),
            other => Err(format!("unknown cover mode '{other}' (expected ring|full)")),
        }
    }
}

impl std::fmt::Display for CoverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoverMode::PaperLiteral => "ring",
            CoverMode::FullPatrol => "full",
        })
    }
}

/// Inner and outer radius of the motion ring, `l2 − l1 ∓ d`, clamped at 0.
///
/// For equal arms the inner radius would be `−d`; it is clamped so that areas
/// stay non-negative.
pub fn ring_radii(geom: &ArmGeometry, safety: &SafetyModel) -> (f64, f64) {
    let base = geom.l2() - geom.l1();
    ((base - safety.d).max(0.0), (base + safety.d).max(0.0))
}

/// Outer and inner radius of the inflated patrol annulus.
fn patrol_radii(geom: &ArmGeometry, safety: &SafetyModel) -> (f64, f64) {
    (
        geom.reach_max() + safety.d,
        (geom.l2() - geom.l1() - safety.d).max(0.0),
    )
}

pub fn s_cover(geom: &ArmGeometry, safety: &SafetyModel, mode: CoverMode) -> f64 {
    match mode {
        CoverMode::PaperLiteral => {
            let (inner, outer) = ring_radii(geom, safety);
            PI * (outer * outer - inner * inner)
        }
        CoverMode::FullPatrol => {
            let (outer, inner) = patrol_radii(geom, safety);
            PI * (outer * outer - inner * inner)
        }
    }
}

/// Area the eccentric arm can sweep into a neighbor `center_distance` away:
/// `d (l2 + d) max(0, (l1 + l2 − D/2) / (l2/2))`.
pub fn s_collision(geom: &ArmGeometry, safety: &SafetyModel, center_distance: f64) -> f64 {
    let (l1, l2, d) = (geom.l1(), geom.l2(), safety.d);
    d * (l2 + d) * ((l1 + l2 - 0.5 * center_distance) / (0.5 * l2)).max(0.0)
}

/// Area of the intersection of two disks of radii `r1`, `r2` whose centers
/// are `dist` apart.
pub fn circle_intersection_area(r1: f64, r2: f64, dist: f64) -> f64 {
    if r1 <= 0.0 || r2 <= 0.0 || dist >= r1 + r2 {
        return 0.0;
    }
    if dist <= (r1 - r2).abs() {
        let r = r1.min(r2);
        return PI * r * r;
    }
    let a1 = ((dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist * r1)).clamp(-1.0, 1.0);
    let a2 = ((dist * dist + r2 * r2 - r1 * r1) / (2.0 * dist * r2)).clamp(-1.0, 1.0);
    let k = (-dist + r1 + r2) * (dist + r1 - r2) * (dist - r1 + r2) * (dist + r1 + r2);
    (r1 * r1 * a1.acos() + r2 * r2 * a2.acos() - 0.5 * k.max(0.0).sqrt()).max(0.0)
}

/// Conflict area between two positioners `center_distance` apart: the overlap
/// of their inflated patrol annuli.
pub fn s_conflict(geom: &ArmGeometry, safety: &SafetyModel, center_distance: f64) -> f64 {
    let (outer, inner) = patrol_radii(geom, safety);
    if center_distance >= 2.0 * outer {
        return 0.0;
    }
    // (O1 \ I1) ∩ (O2 \ I2) = O1∩O2 − O1∩I2 − I1∩O2 + I1∩I2, with I ⊂ O
    let oo = circle_intersection_area(outer, outer, center_distance);
    let oi = circle_intersection_area(outer, inner, center_distance);
    let ii = circle_intersection_area(inner, inner, center_distance);
    (oo - 2.0 * oi + ii).max(0.0)
}

/// Area terms for one neighbor class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassTerm {
    pub distance: f64,
    pub multiplicity: usize,
    pub s_conflict: f64,
    pub s_collision: f64,
    /// `multiplicity · S_conflict · S_collision / S_cover²`.
    pub term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticAreas {
    pub s_cover: f64,
    pub classes: Vec<ClassTerm>,
    pub r_inner: f64,
    pub r_outer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticResult {
    /// Unclamped sum; can exceed 1 for extreme geometries.
    pub probability: f64,
    pub probability_clamped: f64,
    pub areas: AnalyticAreas,
    pub interaction: InteractionType,
    pub cover_mode: CoverMode,
}

/// Analytic collision probability with the default (thin-ring) cover.
pub fn collision_probability_analytic(
    geom: &ArmGeometry,
    safety: &SafetyModel,
    pitch: f64,
) -> Result<AnalyticResult, AnalyticError> {
    collision_probability_with_cover(geom, safety, pitch, CoverMode::default())
}

pub fn collision_probability_with_cover(
    geom: &ArmGeometry,
    safety: &SafetyModel,
    pitch: f64,
    mode: CoverMode,
) -> Result<AnalyticResult, AnalyticError> {
    if !(pitch.is_finite() && pitch > 0.0) {
        return Err(AnalyticError::InvalidPitch(pitch));
    }
    let interaction = classify_interaction(geom, safety, pitch);
    let cover = s_cover(geom, safety, mode);
    let (r_inner, r_outer) = ring_radii(geom, safety);
    let mut areas = AnalyticAreas {
        s_cover: cover,
        classes: Vec::new(),
        r_inner,
        r_outer,
    };
    if interaction == InteractionType::Type1 {
        return Ok(AnalyticResult {
            probability: 0.0,
            probability_clamped: 0.0,
            areas,
            interaction,
            cover_mode: mode,
        });
    }

    let cutoff = 2.0 * (geom.reach_max() + safety.d);
    let mut numerator = 0.0;
    for class in lattice_neighbor_classes(pitch, cutoff) {
        if class.distance >= cutoff {
            continue;
        }
        let conflict = s_conflict(geom, safety, class.distance);
        let collision = s_collision(geom, safety, class.distance);
        let weighted = class.multiplicity as f64 * conflict * collision;
        numerator += weighted;
        areas.classes.push(ClassTerm {
            distance: class.distance,
            multiplicity: class.multiplicity,
            s_conflict: conflict,
            s_collision: collision,
            term: if cover > 0.0 { weighted / (cover * cover) } else { 0.0 },
        });
    }
    let probability = if cover > 0.0 {
        numerator / (cover * cover)
    } else if numerator > 0.0 {
        return Err(AnalyticError::DegenerateCover);
    } else {
        0.0
    };
    Ok(AnalyticResult {
        probability,
        probability_clamped: probability.clamp(0.0, 1.0),
        areas,
        interaction,
        cover_mode: mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};

    fn geom(l1: f64, l2: f64) -> ArmGeometry {
        ArmGeometry::new(l1, l2).unwrap()
    }

    fn safety(d: f64) -> SafetyModel {
        SafetyModel::fixed(d, 4.5).unwrap()
    }

    /// Deterministic polar-grid quadrature of the annulus intersection, centered
    /// on the first positioner.
    fn conflict_quadrature(outer: f64, inner: f64, dist: f64, nr: usize, nt: usize) -> f64 {
        let mut area = 0.0;
        let dr = (outer - inner) / nr as f64;
        let dt = 2.0 * PI / nt as f64;
        for i in 0..nr {
            let r = inner + (i as f64 + 0.5) * dr;
            let mut hits = 0usize;
            for k in 0..nt {
                let t = (k as f64 + 0.5) * dt;
                let (x, y) = (r * t.cos() - dist, r * t.sin());
                let q = (x * x + y * y).sqrt();
                if q <= outer && q >= inner {
                    hits += 1;
                }
            }
            area += hits as f64 * r * dr * dt;
        }
        area
    }

    /// Rejection sampling over the bounding box of the outer-disk lens.
    fn conflict_rejection(outer: f64, inner: f64, dist: f64, samples: usize, seed: u64) -> f64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (x0, x1) = (dist - outer, outer);
        let h = (outer * outer - 0.25 * dist * dist).max(0.0).sqrt();
        let mut hits = 0usize;
        for _ in 0..samples {
            let x = rng.random_range(x0..x1);
            let y = rng.random_range(-h..h);
            let a = x * x + y * y;
            let b = (x - dist) * (x - dist) + y * y;
            let (o2, i2) = (outer * outer, inner * inner);
            if a <= o2 && a >= i2 && b <= o2 && b >= i2 {
                hits += 1;
            }
        }
        hits as f64 / samples as f64 * (x1 - x0) * 2.0 * h
    }

    #[test]
    fn radii_examples() {
        assert_eq!(ring_radii(&geom(8.25, 8.25), &safety(4.5)), (0.0, 4.5));
        let (i, o) = ring_radii(&geom(7.25, 14.5), &safety(4.5));
        assert_abs_diff_eq!(i, 14.5 - 7.25 - 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(o, 14.5 - 7.25 + 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(i, 2.75, epsilon = 1e-12);
        assert_abs_diff_eq!(o, 11.75, epsilon = 1e-12);
        assert_eq!(ring_radii(&geom(7.25, 14.5), &safety(0.0)), (7.25, 7.25));
    }

    #[test]
    fn cover_examples() {
        let c = s_cover(&geom(7.25, 14.5), &safety(4.5), CoverMode::PaperLiteral);
        assert_relative_eq!(c, PI * (11.75f64.powi(2) - 2.75f64.powi(2)), max_relative = 1e-12);
        assert_relative_eq!(c, 409.98, max_relative = 1e-4);
        assert_eq!(s_cover(&geom(7.25, 14.5), &safety(0.0), CoverMode::PaperLiteral), 0.0);
        let c = s_cover(&geom(8.25, 8.25), &safety(4.5), CoverMode::FullPatrol);
        assert_relative_eq!(c, PI * 441.0, max_relative = 1e-12);
        assert_relative_eq!(c, 1385.44, max_relative = 1e-5);
    }

    #[test]
    fn collision_area_examples() {
        let g = geom(8.25, 8.25);
        assert_eq!(s_collision(&g, &safety(4.5), 33.0), 0.0);
        assert_eq!(s_collision(&g, &safety(4.5), 40.0), 0.0);
        let want = 4.5 * 12.75 * ((16.5 - 12.8) / 4.125);
        assert_relative_eq!(s_collision(&g, &safety(4.5), 25.6), want, max_relative = 1e-12);
        assert_relative_eq!(want, 51.466, max_relative = 1e-4);
        assert_eq!(s_collision(&geom(7.25, 20.0), &safety(0.0), 10.0), 0.0);
    }

    #[test]
    fn lens_formula_limits() {
        assert_eq!(circle_intersection_area(2.0, 3.0, 5.0), 0.0);
        assert_relative_eq!(circle_intersection_area(2.0, 3.0, 0.5), 4.0 * PI, max_relative = 1e-15);
        // two unit circles one radius apart: 2π/3 − √3/2
        assert_relative_eq!(
            circle_intersection_area(1.0, 1.0, 1.0),
            2.0 * PI / 3.0 - 3f64.sqrt() / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn conflict_examples() {
        let g = geom(8.25, 8.25);
        let s = safety(4.5);
        assert_eq!(s_conflict(&g, &s, 42.0), 0.0);
        assert_eq!(s_conflict(&g, &s, 50.0), 0.0);
        let coincident = s_conflict(&g, &s, 0.0);
        assert_relative_eq!(coincident, PI * 441.0, max_relative = 1e-12);
        let g2 = geom(7.25, 20.0);
        let (outer, inner) = (31.75, 20.0 - 7.25 - 4.5);
        assert_relative_eq!(
            s_conflict(&g2, &s, 0.0),
            PI * (outer * outer - inner * inner),
            max_relative = 1e-12
        );

        let lens = s_conflict(&g, &s, 25.6);
        let mc = conflict_rejection(21.0, 0.0, 25.6, 10_000_000, 17);
        assert_relative_eq!(lens, mc, max_relative = 1e-3);
        assert_relative_eq!(lens, conflict_quadrature(21.0, 0.0, 25.6, 2000, 4000), max_relative = 1e-4);
    }

    #[test]
    fn conflict_matches_oracles_on_random_triples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for trial in 0..50 {
            let l1 = rng.random_range(5.0..15.0);
            let ratio = rng.random_range(1.0..3.0);
            let d = rng.random_range(0.5..6.0);
            let g = geom(l1, l1 * ratio);
            let s = safety(d);
            let outer = g.reach_max() + d;
            let inner = (g.l2() - g.l1() - d).max(0.0);
            let dist = rng.random_range(0.2..1.8) * outer;
            let exact = s_conflict(&g, &s, dist);
            let mc = conflict_rejection(outer, inner, dist, 10_000_000, 1000 + trial);
            assert!(
                (exact - mc).abs() <= 2e-3 * exact,
                "trial {trial}: {exact} vs {mc} (l1 {l1}, ratio {ratio}, d {d}, dist {dist})"
            );
        }
    }

    #[test]
    fn type1_is_exactly_zero() {
        let r = collision_probability_analytic(&geom(8.25, 8.25), &safety(4.5), 50.0).unwrap();
        assert_eq!(r.interaction, InteractionType::Type1);
        assert_eq!(r.probability, 0.0);
        assert!(r.areas.classes.is_empty());
    }

    #[test]
    fn small_array_defaults_compose_from_areas() {
        let g = geom(8.25, 8.25);
        let s = safety(4.5);
        for mode in [CoverMode::PaperLiteral, CoverMode::FullPatrol] {
            let r = collision_probability_with_cover(&g, &s, 25.6, mode).unwrap();
            assert_eq!(r.interaction, InteractionType::Type2);
            assert_eq!(r.areas.classes.len(), 1);
            assert_eq!(r.areas.classes[0].multiplicity, 6);
            let cover = s_cover(&g, &s, mode);
            let want = 6.0 * s_conflict(&g, &s, 25.6) * s_collision(&g, &s, 25.6) / (cover * cover);
            assert_relative_eq!(r.probability, want, max_relative = 1e-12);
            assert!(r.probability_clamped <= 1.0);
        }
    }

    #[test]
    fn decreases_with_pitch_spot_check() {
        let g = geom(8.25, 8.25);
        let s = safety(4.5);
        for mode in [CoverMode::PaperLiteral, CoverMode::FullPatrol] {
            let near = collision_probability_with_cover(&g, &s, 25.6, mode).unwrap();
            let far = collision_probability_with_cover(&g, &s, 35.0, mode).unwrap();
            assert!(near.probability > far.probability);
        }
    }

    #[test]
    fn full_patrol_trends_on_parameter_grids() {
        let s = safety(4.5);
        // small-array grid: base arm 8.25, ratio 1..3, pitch 25.6..35
        let mut grids = vec![(vec![8.25], (0..=20).map(|k| 1.0 + 0.1 * k as f64).collect::<Vec<_>>(),
            (0..=20).map(|k| 25.6 + 0.47 * k as f64).collect::<Vec<_>>())];
        // large-array grid: arm 7.25..14.5, ratio 1..2, pitch 24.6..35
        grids.push((
            (0..=6).map(|k| 7.25 + 7.25 * k as f64 / 6.0).collect(),
            (0..=10).map(|k| 1.0 + 0.1 * k as f64).collect(),
            (0..=10).map(|k| 24.6 + 1.04 * k as f64).collect(),
        ));
        for (arms, ratios, pitches) in grids {
            for &l1 in &arms {
                for &pitch in &pitches {
                    let mut prev = -1.0;
                    for &ratio in &ratios {
                        let g = ArmGeometry::from_ratio(l1, ratio).unwrap();
                        let p = collision_probability_with_cover(&g, &s, pitch, CoverMode::FullPatrol)
                            .unwrap()
                            .probability;
                        assert!(p >= prev, "ratio trend broken at l1 {l1} pitch {pitch} ratio {ratio}");
                        prev = p;
                    }
                }
                for &ratio in &ratios {
                    let g = ArmGeometry::from_ratio(l1, ratio).unwrap();
                    let mut prev = f64::INFINITY;
                    for &pitch in &pitches {
                        let p = collision_probability_with_cover(&g, &s, pitch, CoverMode::FullPatrol)
                            .unwrap()
                            .probability;
                        assert!(p <= prev, "pitch trend broken at l1 {l1} ratio {ratio} pitch {pitch}");
                        prev = p;
                    }
                }
            }
        }
    }

    #[test]
    fn terms_are_non_negative_and_equal_arms_work() {
        let s = safety(4.5);
        for (l1, ratio, pitch) in [(8.25, 1.0, 25.6), (8.25, 3.0, 25.6), (14.5, 2.0, 24.6), (7.25, 1.0, 40.0)] {
            let g = ArmGeometry::from_ratio(l1, ratio).unwrap();
            for mode in [CoverMode::PaperLiteral, CoverMode::FullPatrol] {
                let r = collision_probability_with_cover(&g, &s, pitch, mode).unwrap();
                assert!(r.areas.classes.iter().all(|c| c.term >= 0.0));
                let total: f64 = r.areas.classes.iter().map(|c| c.term).sum();
                assert_relative_eq!(total, r.probability, max_relative = 1e-12);
                // dropping a class never increases the sum
                for skip in 0..r.areas.classes.len() {
                    let partial: f64 = r
                        .areas
                        .classes
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != skip)
                        .map(|(_, c)| c.term)
                        .sum();
                    assert!(partial <= r.probability + 1e-15);
                }
            }
        }
    }

    #[test]
    fn zero_safety_radius() {
        let g = geom(7.25, 14.5);
        let s = SafetyModel::fixed(0.0, 4.5).unwrap();
        let r = collision_probability_analytic(&g, &s, 25.6).unwrap();
        assert_eq!(r.areas.s_cover, 0.0);
        assert_eq!(r.probability, 0.0);
        assert!(collision_probability_analytic(&g, &s, 0.0).is_err());
    }
}
