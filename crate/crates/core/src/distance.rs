//! Minimum-distance kernels between eccentric-arm segments.
//!
//! [`segment_min_distance_exact`] is the closed-form reference.
//! [`segment_min_distance_discrete`] samples `n + 1` equally spaced points on
//! each segment and takes the smallest point-pair distance; it never
//! underestimates the true distance and is what the batch detector runs.

use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryError, Point, Segment};

/// Default number of sub-segments for the discretized kernel.
pub const DEFAULT_DISCRETE_SAMPLES: usize = 64;

/// Which distance kernel to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    Exact,
    /// Discretized kernel with `n` sub-segments (`n + 1` samples per segment).
    Discrete(usize),
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Discrete(DEFAULT_DISCRETE_SAMPLES)
    }
}

impl Kernel {
    pub fn validate(self) -> Result<Self, GeometryError> {
        match self {
            Kernel::Discrete(n) if n < 2 => Err(GeometryError::InvalidSampleCount(n)),
            k => Ok(k),
        }
    }

    /// Distance between two segments under this kernel.
    ///
    /// The sample count must already be validated.
    #[inline]
    pub fn distance(self, s1: &Segment, s2: &Segment) -> f64 {
        match self {
            Kernel::Exact => segment_min_distance_exact(s1, s2),
            Kernel::Discrete(n) => discrete_unchecked(s1, s2, n),
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kernel::Exact => write!(f, "exact"),
            Kernel::Discrete(n) => write!(f, "discrete:{n}"),
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = String;

    /// Parses `exact`, `discrete` (64 samples) or `discrete:<n>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "exact" => Ok(Kernel::Exact),
            "discrete" => Ok(Kernel::default()),
            _ => {
                let n = s
                    .strip_prefix("discrete:")
                    .ok_or_else(|| format!("unknown kernel '{s}'"))?
                    .parse::<usize>()
                    .map_err(|e| format!("bad sample count in '{s}': {e}"))?;
                Kernel::Discrete(n).validate().map_err(|e| e.to_string())
            }
        }
    }
}

/// Distance from `p` to the closed segment `s`.
///
/// The closest point is snapped to the endpoint itself when the projection
/// clamps, so endpoint distances are computed exactly like sampled ones.
#[inline]
pub fn point_segment_distance(p: Point, s: &Segment) -> f64 {
    let ab = s.b - s.a;
    let len_sq = ab.norm_sq();
    let closest = if len_sq == 0.0 {
        s.a
    } else {
        let t = (p - s.a).dot(ab) / len_sq;
        if t <= 0.0 {
            s.a
        } else if t >= 1.0 {
            s.b
        } else {
            s.a + ab * t
        }
    };
    let dx = p.x - closest.x;
    let dy = p.y - closest.y;
    (dx * dx + dy * dy).sqrt()
}

#[inline]
fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

/// True minimum Euclidean distance between two closed segments.
///
/// Zero when the segments cross; otherwise the minimum is attained at an
/// endpoint of one of them.
pub fn segment_min_distance_exact(s1: &Segment, s2: &Segment) -> f64 {
    let o1 = orient(s1.a, s1.b, s2.a);
    let o2 = orient(s1.a, s1.b, s2.b);
    let o3 = orient(s2.a, s2.b, s1.a);
    let o4 = orient(s2.a, s2.b, s1.b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return 0.0;
    }
    let d1 = point_segment_distance(s1.a, s2);
    let d2 = point_segment_distance(s1.b, s2);
    let d3 = point_segment_distance(s2.a, s1);
    let d4 = point_segment_distance(s2.b, s1);
    d1.min(d2).min(d3.min(d4))
}

/// Minimum distance over all pairs of `n + 1` equally spaced samples.
pub fn segment_min_distance_discrete(
    s1: &Segment,
    s2: &Segment,
    n: usize,
) -> Result<f64, GeometryError> {
    if n < 2 {
        return Err(GeometryError::InvalidSampleCount(n));
    }
    Ok(discrete_unchecked(s1, s2, n))
}

/// `i`-th of `n + 1` samples along `a -> b`. Shared with the batch kernel so
/// both produce identical bits.
#[inline(always)]
pub(crate) fn sample(a: f64, b: f64, i: usize, n: usize) -> f64 {
    a + (b - a) * (i as f64 / n as f64)
}

#[inline]
pub(crate) fn discrete_unchecked(s1: &Segment, s2: &Segment, n: usize) -> f64 {
    discrete_min_sq(
        [s1.a.x, s1.a.y, s1.b.x, s1.b.y],
        [s2.a.x, s2.a.y, s2.b.x, s2.b.y],
        n,
    )
    .sqrt()
}

/// Smallest squared sample-pair distance. Samples are generated on the fly.
#[inline]
pub(crate) fn discrete_min_sq(s1: [f64; 4], s2: [f64; 4], n: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..=n {
        let px = sample(s1[0], s1[2], i, n);
        let py = sample(s1[1], s1[3], i, n);
        for j in 0..=n {
            let dx = px - sample(s2[0], s2[2], j, n);
            let dy = py - sample(s2[1], s2[3], j, n);
            let d = dx * dx + dy * dy;
            best = best.min(d);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn seg(ax: f64, ay: f64, bx: f64, by: f64) -> Segment {
        Segment::new(Point::new(ax, ay), Point::new(bx, by))
    }

    /// Dense brute force: every sample pair of two `m + 1`-point discretizations.
    fn brute(s1: &Segment, s2: &Segment, m: usize) -> f64 {
        let pts = |s: &Segment| -> Vec<Point> {
            (0..=m)
                .map(|k| {
                    let t = k as f64 / m as f64;
                    Point::new(s.a.x * (1.0 - t) + s.b.x * t, s.a.y * (1.0 - t) + s.b.y * t)
                })
                .collect()
        };
        let (p, q) = (pts(s1), pts(s2));
        p.iter()
            .flat_map(|a| q.iter().map(move |b| a.distance(*b)))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn exact_examples() {
        assert_eq!(segment_min_distance_exact(&seg(0., 0., 1., 0.), &seg(0., 1., 1., 1.)), 1.0);
        assert_eq!(segment_min_distance_exact(&seg(0., 0., 1., 1.), &seg(0., 1., 1., 0.)), 0.0);
        // collinear, disjoint
        assert_eq!(segment_min_distance_exact(&seg(0., 0., 1., 0.), &seg(2., 0., 3., 0.)), 1.0);
        // touching at an endpoint
        assert_eq!(segment_min_distance_exact(&seg(0., 0., 1., 0.), &seg(1., 0., 1., 5.)), 0.0);
        // T junction: endpoint lies on the interior of the other segment
        assert_eq!(segment_min_distance_exact(&seg(-1., 0., 1., 0.), &seg(0., 0., 0., 3.)), 0.0);
        // degenerate segments behave as points
        let p = seg(3., 4., 3., 4.);
        assert_eq!(segment_min_distance_exact(&p, &seg(0., 0., 0., 0.)), 5.0);
        assert_eq!(segment_min_distance_exact(&p, &seg(0., 0., 6., 0.)), 4.0);
    }

    #[test]
    fn discrete_examples() {
        let s = seg(0.3, -1.0, 2.0, 4.0);
        assert_eq!(segment_min_distance_discrete(&s, &s, 7).unwrap(), 0.0);
        assert_eq!(
            segment_min_distance_discrete(&seg(0., 0., 1., 0.), &seg(0., 1., 1., 1.), 64).unwrap(),
            1.0
        );
        let crossing =
            segment_min_distance_discrete(&seg(0., 0., 1., 1.), &seg(0., 1., 1., 0.), 64).unwrap();
        // both diagonals sample their crossing point
        assert_eq!(crossing, 0.0);
        let offset =
            segment_min_distance_discrete(&seg(0., 0., 1., 1.), &seg(0., 0.9, 1., -0.1), 64).unwrap();
        assert!(offset > 0.0 && offset <= SQRT_2 / 64.0, "{offset}");
        assert_eq!(
            segment_min_distance_discrete(&s, &s, 1),
            Err(GeometryError::InvalidSampleCount(1))
        );
    }

    #[test]
    fn kernel_parsing() {
        assert_eq!("exact".parse::<Kernel>().unwrap(), Kernel::Exact);
        assert_eq!("discrete".parse::<Kernel>().unwrap(), Kernel::Discrete(64));
        assert_eq!("Discrete:16".parse::<Kernel>().unwrap(), Kernel::Discrete(16));
        assert!("discrete:1".parse::<Kernel>().is_err());
        assert!("gjk".parse::<Kernel>().is_err());
        assert_eq!(Kernel::Discrete(64).to_string(), "discrete:64");
    }

    #[test]
    fn discrete_error_shrinks_with_n() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let corpus: Vec<(Segment, Segment)> = (0..400)
            .map(|_| {
                let mut r = || rng.random_range(-10.0..10.0);
                (seg(r(), r(), r(), r()), seg(r(), r(), r(), r()))
            })
            .collect();
        let mut prev = f64::INFINITY;
        for n in [8, 16, 32, 64, 128] {
            let worst = corpus
                .iter()
                .map(|(a, b)| {
                    segment_min_distance_discrete(a, b, n).unwrap()
                        - segment_min_distance_exact(a, b)
                })
                .fold(0.0, f64::max);
            assert!(worst <= prev, "n = {n}: {worst} > {prev}");
            prev = worst;
        }
    }

    fn arb_segment() -> impl Strategy<Value = Segment> {
        (-20.0f64..20.0, -20.0f64..20.0, -20.0f64..20.0, -20.0f64..20.0)
            .prop_map(|(a, b, c, d)| seg(a, b, c, d))
    }

    proptest! {
        #[test]
        fn exact_matches_dense_brute_force(s1 in arb_segment(), s2 in arb_segment()) {
            let exact = segment_min_distance_exact(&s1, &s2);
            let dense = brute(&s1, &s2, 1024);
            let scale = s1.length().max(s2.length()).max(1e-9);
            prop_assert!(dense >= exact - 1e-12);
            prop_assert!(dense - exact <= 1e-3 * scale, "{} vs {}", dense, exact);
        }

        #[test]
        fn kernels_are_symmetric(s1 in arb_segment(), s2 in arb_segment(), n in 2usize..40) {
            prop_assert_eq!(
                segment_min_distance_exact(&s1, &s2).to_bits(),
                segment_min_distance_exact(&s2, &s1).to_bits()
            );
            prop_assert_eq!(
                segment_min_distance_discrete(&s1, &s2, n).unwrap().to_bits(),
                segment_min_distance_discrete(&s2, &s1, n).unwrap().to_bits()
            );
        }

        #[test]
        fn discrete_bounds_exact(s1 in arb_segment(), s2 in arb_segment(), n in 2usize..80) {
            let exact = segment_min_distance_exact(&s1, &s2);
            let disc = segment_min_distance_discrete(&s1, &s2, n).unwrap();
            prop_assert!(disc >= exact - 1e-12);
            // each true closest point is within half a spacing of a sample
            let bound = 0.5 * (s1.length() + s2.length()) / n as f64;
            prop_assert!(disc - exact <= bound + 1e-12);
        }

        #[test]
        fn rigid_motion_invariance(
            s1 in arb_segment(),
            s2 in arb_segment(),
            angle in -3.2f64..3.2,
            tx in -100.0f64..100.0,
            ty in -100.0f64..100.0,
        ) {
            let m = |p: Point| {
                let (s, c) = angle.sin_cos();
                Point::new(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty)
            };
            let mv = |s: &Segment| Segment::new(m(s.a), m(s.b));
            let (t1, t2) = (mv(&s1), mv(&s2));
            prop_assert!(
                (segment_min_distance_exact(&s1, &s2) - segment_min_distance_exact(&t1, &t2)).abs()
                    < 1e-9
            );
            prop_assert!(
                (segment_min_distance_discrete(&s1, &s2, 16).unwrap()
                    - segment_min_distance_discrete(&t1, &t2, 16).unwrap())
                .abs()
                    < 1e-9
            );
        }
    }
}
