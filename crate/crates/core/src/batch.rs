//! Data-parallel evaluation of arm distances for many segment pairs.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{discrete_min_sq, segment_min_distance_exact, Kernel};
use crate::geometry::{GeometryError, Point, Segment};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BatchError {
    #[error("pair ({i}, {j}) out of range for {len} segments")]
    IndexOutOfRange { i: u32, j: u32, len: usize },
    #[error("endpoint arrays differ in length")]
    LengthMismatch,
    #[error("pair ({i}, {j}) listed more than once")]
    DuplicatePair { i: u32, j: u32 },
    #[error("pair ({0}, {0}) pairs a segment with itself")]
    SelfPair(u32),
    #[error(transparent)]
    Kernel(#[from] GeometryError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Segment endpoints in structure-of-arrays layout plus the pairs to test.
/// `a` is the elbow and `b` the fiber tip of each arm.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentBatch {
    ax: Vec<f64>,
    ay: Vec<f64>,
    bx: Vec<f64>,
    by: Vec<f64>,
    pairs: Vec<(u32, u32)>,
}

impl SegmentBatch {
    pub fn from_segments(segments: &[Segment], pairs: Vec<(u32, u32)>) -> Result<Self, BatchError> {
        Self::from_arrays(
            segments.iter().map(|s| s.a.x).collect(),
            segments.iter().map(|s| s.a.y).collect(),
            segments.iter().map(|s| s.b.x).collect(),
            segments.iter().map(|s| s.b.y).collect(),
            pairs,
        )
    }

    pub fn from_arrays(
        ax: Vec<f64>,
        ay: Vec<f64>,
        bx: Vec<f64>,
        by: Vec<f64>,
        pairs: Vec<(u32, u32)>,
    ) -> Result<Self, BatchError> {
        let len = ax.len();
        if ay.len() != len || bx.len() != len || by.len() != len {
            return Err(BatchError::LengthMismatch);
        }
        let mut seen = std::collections::HashSet::with_capacity(pairs.len());
        for &(i, j) in &pairs {
            if i as usize >= len || j as usize >= len {
                return Err(BatchError::IndexOutOfRange { i, j, len });
            }
            if i == j {
                return Err(BatchError::SelfPair(i));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(BatchError::DuplicatePair { i, j });
            }
        }
        Ok(Self { ax, ay, bx, by, pairs })
    }

    pub fn len(&self) -> usize {
        self.ax.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ax.is_empty()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn segment(&self, k: usize) -> Segment {
        Segment::new(
            Point::new(self.ax[k], self.ay[k]),
            Point::new(self.bx[k], self.by[k]),
        )
    }

    #[inline(always)]
    fn packed(&self, k: u32) -> [f64; 4] {
        let k = k as usize;
        [self.ax[k], self.ay[k], self.bx[k], self.by[k]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub distances: Vec<f64>,
    /// `distances[k] < threshold`.
    pub flags: Vec<bool>,
    pub elapsed: Duration,
    pub kernel: Kernel,
}

/// Runs `kernel` on every pair of the batch in parallel.
///
/// Each distance is the scalar kernel's value bit for bit, whatever the
/// thread count.
pub fn batch_pair_distances(
    batch: &SegmentBatch,
    kernel: Kernel,
    threshold: f64,
) -> Result<DistanceReport, BatchError> {
    let kernel = kernel.validate()?;
    let start = Instant::now();
    let distances: Vec<f64> = batch
        .pairs
        .par_iter()
        .with_min_len(64)
        .map(|&(i, j)| match kernel {
            Kernel::Discrete(n) => discrete_min_sq(batch.packed(i), batch.packed(j), n).sqrt(),
            Kernel::Exact => segment_min_distance_exact(&batch.segment(i as usize), &batch.segment(j as usize)),
        })
        .collect();
    let elapsed = start.elapsed();
    let flags = distances.iter().map(|&d| d < threshold).collect();
    Ok(DistanceReport {
        distances,
        flags,
        elapsed,
        kernel,
    })
}

/// Bounding-circle pre-check followed by the exact kernel.
///
/// When the circles around the two segments are already more than
/// `threshold` apart, returns their separation (a lower bound on the true
/// distance) and `false` without running the kernel.
pub fn early_exit_pair_distance(s1: &Segment, s2: &Segment, threshold: f64) -> (f64, bool) {
    early_exit_with_kernel(Kernel::Exact, s1, s2, threshold)
}

/// [`early_exit_pair_distance`] with any kernel behind the pre-check. The
/// discrete kernel only runs when the exact distance is below `threshold`;
/// otherwise the exact distance is returned as its lower bound. Verdicts
/// always match the unpruned kernel.
#[inline]
pub fn early_exit_with_kernel(kernel: Kernel, s1: &Segment, s2: &Segment, threshold: f64) -> (f64, bool) {
    let gap = s1.midpoint().distance(s2.midpoint()) - 0.5 * (s1.length() + s2.length());
    // margin covers rounding in the midpoint/length arithmetic
    if gap > threshold + 1e-9 {
        return (gap, false);
    }
    let exact = segment_min_distance_exact(s1, s2);
    let d = match kernel {
        // the sampled distance never undercuts the exact one
        Kernel::Discrete(_) if exact >= threshold => return (exact, false),
        Kernel::Discrete(_) => kernel.distance(s1, s2),
        Kernel::Exact => exact,
    };
    (d, d < threshold)
}

/// Sequential all-pairs baseline: no broad phase, sample points materialized
/// per segment. Returns the verdict for every unordered pair `(i, j)`, `i < j`,
/// in lexicographic order.
pub fn naive_all_pairs(segments: &[Segment], n: usize, threshold: f64) -> Result<Vec<((u32, u32), f64)>, BatchError> {
    Kernel::Discrete(n).validate()?;
    let samples: Vec<Vec<Point>> = segments
        .iter()
        .map(|s| {
            (0..=n)
                .map(|k| {
                    let t = k as f64 / n as f64;
                    Point::new(s.a.x + (s.b.x - s.a.x) * t, s.a.y + (s.b.y - s.a.y) * t)
                })
                .collect()
        })
        .collect();
    let mut hits = Vec::new();
    for i in 0..segments.len() {
        for j in i + 1..segments.len() {
            let mut best = f64::INFINITY;
            for p in &samples[i] {
                for q in &samples[j] {
                    best = best.min((*p - *q).norm_sq());
                }
            }
            let d = best.sqrt();
            if d < threshold {
                hits.push(((i as u32, j as u32), d));
            }
        }
    }
    Ok(hits)
}

/// Runs `f` on a dedicated pool of `workers` threads (0 means rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, BatchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BatchError::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}
