use std::sync::atomic::AtomicBool;

use fieldsim_core::analytic::{collision_probability_with_cover, CoverMode};
use fieldsim_core::array::{classify_interaction, InteractionType};
use fieldsim_core::batch::{batch_pair_distances, with_workers, SegmentBatch};
use fieldsim_core::distance::{segment_min_distance_discrete, segment_min_distance_exact, Kernel};
use fieldsim_core::geometry::{ArmGeometry, Point, SafetyModel, Segment};
use fieldsim_core::montecarlo::{run_simulation, wilson_interval, SimConfig};
use fieldsim_core::regression::{fit_ridge, RegressionModel, RegressionSample};
use fieldsim_core::sweep::{run_sweep, validate, Method, Range, Sampling, SweepSpec};
use proptest::prelude::*;

fn arb_point() -> impl Strategy<Value = Point> {
    (-30.0..30.0f64, -30.0..30.0f64).prop_map(|(x, y)| Point::new(x, y))
}

fn arb_segment() -> impl Strategy<Value = Segment> {
    (arb_point(), arb_point()).prop_map(|(a, b)| Segment::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn discrete_never_undercuts_exact(s1 in arb_segment(), s2 in arb_segment(), n in 2usize..80) {
        let exact = segment_min_distance_exact(&s1, &s2);
        let disc = segment_min_distance_discrete(&s1, &s2, n).unwrap();
        prop_assert!(disc >= exact - 1e-12);
        let spacing = s1.length().max(s2.length()) / n as f64;
        prop_assert!(disc <= exact + spacing);
    }

    #[test]
    fn distances_are_symmetric(s1 in arb_segment(), s2 in arb_segment()) {
        let d12 = segment_min_distance_exact(&s1, &s2);
        let d21 = segment_min_distance_exact(&s2, &s1);
        prop_assert!((d12 - d21).abs() < 1e-12);
        let r = Segment::new(s1.b, s1.a);
        prop_assert!((segment_min_distance_exact(&r, &s2) - d12).abs() < 1e-12);
    }

    #[test]
    fn batch_is_schedule_independent(segs in prop::collection::vec(arb_segment(), 2..40), workers in 1usize..5) {
        let pairs: Vec<(u32, u32)> = (0..segs.len() as u32 - 1).map(|i| (i, i + 1)).collect();
        let batch = SegmentBatch::from_segments(&segs, pairs).unwrap();
        let one = with_workers(1, || batch_pair_distances(&batch, Kernel::Discrete(16), 4.5).unwrap()).unwrap();
        let many = with_workers(workers, || batch_pair_distances(&batch, Kernel::Discrete(16), 4.5).unwrap()).unwrap();
        prop_assert_eq!(&one.distances, &many.distances);
        for (k, &(i, j)) in batch.pairs().iter().enumerate() {
            let scalar = Kernel::Discrete(16).distance(&segs[i as usize], &segs[j as usize]);
            prop_assert_eq!(one.distances[k].to_bits(), scalar.to_bits());
        }
    }

    #[test]
    fn analytic_nonincreasing_in_pitch(arm in 7.25..14.5f64, ratio in 1.0..2.0f64, p1 in 20.0..60.0f64, dp in 0.0..10.0f64) {
        let g = ArmGeometry::from_ratio(arm, ratio).unwrap();
        let s = SafetyModel::default();
        let at = |p| collision_probability_with_cover(&g, &s, p, CoverMode::FullPatrol).unwrap().probability;
        prop_assert!(at(p1 + dp) <= at(p1) + 1e-12);
    }

    #[test]
    fn analytic_zero_for_type1(arm in 5.0..15.0f64, ratio in 1.0..3.0f64, pitch in 10.0..120.0f64) {
        let g = ArmGeometry::from_ratio(arm, ratio).unwrap();
        let s = SafetyModel::default();
        let r = collision_probability_with_cover(&g, &s, pitch, CoverMode::PaperLiteral).unwrap();
        if classify_interaction(&g, &s, pitch) == InteractionType::Type1 {
            prop_assert_eq!(r.probability, 0.0);
        }
        // the swept-area factor vanishes from 2 (l1 + l2) on
        if pitch < 2.0 * g.reach_max() {
            prop_assert!(r.probability > 0.0);
        }
        prop_assert!((0.0..=1.0).contains(&r.probability_clamped));
    }

    #[test]
    fn wilson_brackets_estimate(p in 0.0..=1.0f64, n in 1u64..100_000, z in 0.5..4.0f64) {
        let (lo, hi) = wilson_interval(p, n, z).unwrap();
        prop_assert!(0.0 <= lo && lo <= p + 1e-15 && p <= hi + 1e-15 && hi <= 1.0);
    }

    #[test]
    fn model_record_round_trips(c in prop::array::uniform10(-1e3..1e3f64)) {
        let m = RegressionModel::from_coefficients(c);
        let back = RegressionModel::from_record(&m.to_record()).unwrap();
        prop_assert_eq!(back.coefficients, m.coefficients);
    }
}

#[test]
fn simulation_matches_across_worker_counts() {
    let config = SimConfig {
        iterations_max: 40,
        root_seed: 77,
        ..SimConfig::small_array(2.0, 25.6).unwrap()
    };
    let a = with_workers(1, || run_simulation(&config).unwrap()).unwrap();
    let b = with_workers(3, || run_simulation(&config).unwrap()).unwrap();
    assert_eq!(a, b);
    assert!(a.p_hat > 0.0);
}

#[test]
fn exact_and_discrete_simulations_agree_within_half_width() {
    let base = SimConfig {
        iterations_max: 150,
        root_seed: 3,
        ..SimConfig::small_array(2.5, 25.6).unwrap()
    };
    let d = run_simulation(&base).unwrap();
    let e = run_simulation(&SimConfig {
        kernel: Kernel::Exact,
        ..base
    })
    .unwrap();
    assert!((d.p_hat - e.p_hat).abs() <= d.half_width());
}

#[test]
fn analytic_sweep_validated_against_itself() {
    let spec = SweepSpec {
        arm: Range::new(7.25, 14.5),
        ratio: Range::new(1.0, 2.0),
        pitch: Range::new(24.6, 35.0),
        sampling: Sampling::Grid {
            arm_steps: 2,
            ratio_steps: 3,
            pitch_steps: 3,
        },
        template: SimConfig::large_array(7.25, 1.0, 24.6).unwrap(),
        cover_mode: CoverMode::FullPatrol,
        seed: 1,
        region_scale: None,
    };
    let mut records = Vec::new();
    run_sweep(&spec, &[Method::Analytic], &AtomicBool::new(false), |r| {
        records.push(r.clone());
        Ok(())
    })
    .unwrap();
    assert_eq!(records.len(), 18);
    let entries: Vec<_> = records.iter().map(|r| (r.point, r.probability, r.probability)).collect();
    let report = validate(&entries).unwrap();
    assert_eq!(report.residual_mean, 0.0);
    assert_eq!(report.residual_variance, 0.0);
    assert!((report.spearman - 1.0).abs() < 1e-12);
}

#[test]
fn ridge_fits_analytic_surface_reasonably() {
    let s = SafetyModel::default();
    let mut samples = Vec::new();
    for i in 0..6 {
        for j in 0..5 {
            for k in 0..5 {
                let (x, y, z) = (7.25 + i as f64 * 1.45, 1.0 + j as f64 * 0.25, 24.6 + k as f64 * 2.6);
                let g = ArmGeometry::from_ratio(x, y).unwrap();
                let f = collision_probability_with_cover(&g, &s, z, CoverMode::FullPatrol).unwrap().probability;
                samples.push(RegressionSample::new(x, y, z, f));
            }
        }
    }
    let model = fit_ridge(&samples, 1e-6).unwrap();
    let r2 = fieldsim_core::regression::r_squared(&model, &samples).unwrap();
    assert!(r2 > 0.9, "{r2}");
}
