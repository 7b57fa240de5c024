//! Quadratic response surface in (arm length, arm ratio, pitch), fitted by
//! ridge-regularized least squares.
//!
//! Basis order: `[1, x, y, z, x², y², z², xy, xz, yz]`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;

pub const BASIS_LEN: usize = 10;

/// Published surrogate coefficients (a..j), in basis order. Their input
/// scaling is unknown, so they are kept for reference and evaluation only.
pub const REFERENCE_COEFFICIENTS: [f64; BASIS_LEN] = [
    18.6635e-3, 4.61227e-3, 15.9225e-3, -15.0398e-3, 1.07078e-3, 2.67496e-3, 2.87948e-3,
    2.23372e-3, -3.19570e-3, -8.26024e-3,
];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RegressionError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("regularized normal matrix is numerically singular; use lambda > 0")]
    SingularSystem,
    #[error("test targets have zero variance")]
    ZeroVariance,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed model record: {0}")]
    Parse(String),
}

/// One observation: arm length `x` (mm), ratio `y`, pitch `z` (mm) and the
/// collision rate `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionSample {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub f: f64,
}

impl RegressionSample {
    pub fn new(x: f64, y: f64, z: f64, f: f64) -> Self {
        Self { x, y, z, f }
    }
}

pub fn design_row(x: f64, y: f64, z: f64) -> [f64; BASIS_LEN] {
    [1.0, x, y, z, x * x, y * y, z * z, x * y, x * z, y * z]
}

/// Per-variable affine map applied before the basis: `(v - shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub shift: [f64; 3],
    pub scale: [f64; 3],
}

impl Standardization {
    pub const IDENTITY: Self = Self {
        shift: [0.0; 3],
        scale: [1.0; 3],
    };

    /// Z-score with population standard deviation; a constant column keeps
    /// scale 1.
    pub fn fit(samples: &[RegressionSample]) -> Self {
        let n = samples.len().max(1) as f64;
        let cols = |k: usize| samples.iter().map(move |s| [s.x, s.y, s.z][k]);
        let mut shift = [0.0; 3];
        let mut scale = [1.0; 3];
        for k in 0..3 {
            let mean = cols(k).sum::<f64>() / n;
            let var = cols(k).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            shift[k] = mean;
            if var > 0.0 {
                scale[k] = var.sqrt();
            }
        }
        Self { shift, scale }
    }

    pub fn apply(&self, x: f64, y: f64, z: f64) -> (f64, f64, f64) {
        (
            (x - self.shift[0]) / self.scale[0],
            (y - self.shift[1]) / self.scale[1],
            (z - self.shift[2]) / self.scale[2],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub coefficients: [f64; BASIS_LEN],
    pub lambda: f64,
    pub standardization: Standardization,
}

impl RegressionModel {
    pub fn from_coefficients(coefficients: [f64; BASIS_LEN]) -> Self {
        Self {
            coefficients,
            lambda: 0.0,
            standardization: Standardization::IDENTITY,
        }
    }

    pub fn row(&self, x: f64, y: f64, z: f64) -> [f64; BASIS_LEN] {
        let (u, v, w) = self.standardization.apply(x, y, z);
        design_row(u, v, w)
    }

    /// Raw surrogate value; not clamped to `[0, 1]`.
    pub fn predict(&self, x: f64, y: f64, z: f64) -> f64 {
        self.row(x, y, z)
            .iter()
            .zip(&self.coefficients)
            .map(|(b, c)| b * c)
            .sum()
    }

    /// Single-line record: 10 coefficients, lambda, 3 shifts, 3 scales.
    pub fn to_record(&self) -> String {
        let s = &self.standardization;
        self.coefficients
            .iter()
            .chain(std::iter::once(&self.lambda))
            .chain(&s.shift)
            .chain(&s.scale)
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn from_record(record: &str) -> Result<Self, RegressionError> {
        let values = record
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| RegressionError::Parse(format!("'{t}': {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != BASIS_LEN + 7 {
            return Err(RegressionError::Parse(format!(
                "expected {} numbers, got {}",
                BASIS_LEN + 7,
                values.len()
            )));
        }
        let mut coefficients = [0.0; BASIS_LEN];
        coefficients.copy_from_slice(&values[..BASIS_LEN]);
        let tail = &values[BASIS_LEN..];
        Ok(Self {
            coefficients,
            lambda: tail[0],
            standardization: Standardization {
                shift: [tail[1], tail[2], tail[3]],
                scale: [tail[4], tail[5], tail[6]],
            },
        })
    }
}

/// Ridge fit with z-score standardization computed from `samples`.
pub fn fit_ridge(samples: &[RegressionSample], lambda: f64) -> Result<RegressionModel, RegressionError> {
    fit_ridge_with(samples, lambda, Standardization::fit(samples))
}

/// Minimizes `Σ (f - row·c)² + lambda·Σ_{k≥1} c_k²` through the normal
/// equations; the intercept is not penalized.
pub fn fit_ridge_with(
    samples: &[RegressionSample],
    lambda: f64,
    standardization: Standardization,
) -> Result<RegressionModel, RegressionError> {
    if samples.len() < BASIS_LEN {
        return Err(RegressionError::TooFewSamples {
            needed: BASIS_LEN,
            got: samples.len(),
        });
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(RegressionError::InvalidParameter(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    let mut model = RegressionModel {
        coefficients: [0.0; BASIS_LEN],
        lambda,
        standardization,
    };
    let mut a = [[0.0; BASIS_LEN]; BASIS_LEN];
    let mut b = [0.0; BASIS_LEN];
    for s in samples {
        let r = model.row(s.x, s.y, s.z);
        for i in 0..BASIS_LEN {
            b[i] += r[i] * s.f;
            for j in 0..=i {
                a[i][j] += r[i] * r[j];
            }
        }
    }
    for i in 0..BASIS_LEN {
        for j in 0..i {
            a[j][i] = a[i][j];
        }
    }
    for (k, row) in a.iter_mut().enumerate().skip(1) {
        row[k] += lambda;
    }
    model.coefficients = cholesky_solve(a, b)?;
    Ok(model)
}

fn cholesky_solve(
    mut a: [[f64; BASIS_LEN]; BASIS_LEN],
    mut b: [f64; BASIS_LEN],
) -> Result<[f64; BASIS_LEN], RegressionError> {
    let max_diag = (0..BASIS_LEN).map(|k| a[k][k]).fold(0.0, f64::max);
    let tol = max_diag * 1e-13;
    for j in 0..BASIS_LEN {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > tol) {
            return Err(RegressionError::SingularSystem);
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..BASIS_LEN {
            let mut v = a[i][j];
            for k in 0..j {
                v -= a[i][k] * a[j][k];
            }
            a[i][j] = v / d;
        }
    }
    for i in 0..BASIS_LEN {
        for k in 0..i {
            b[i] -= a[i][k] * b[k];
        }
        b[i] /= a[i][i];
    }
    for i in (0..BASIS_LEN).rev() {
        for k in i + 1..BASIS_LEN {
            b[i] -= a[k][i] * b[k];
        }
        b[i] /= a[i][i];
    }
    Ok(b)
}

/// Coefficient of determination `1 - SS_res / SS_tot` on `samples`.
pub fn r_squared(model: &RegressionModel, samples: &[RegressionSample]) -> Result<f64, RegressionError> {
    if samples.len() < 2 {
        return Err(RegressionError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if samples.iter().all(|s| s.f == samples[0].f) {
        return Err(RegressionError::ZeroVariance);
    }
    let mean = samples.iter().map(|s| s.f).sum::<f64>() / samples.len() as f64;
    let ss_tot: f64 = samples.iter().map(|s| (s.f - mean).powi(2)).sum();
    let ss_res: f64 = samples
        .iter()
        .map(|s| (s.f - model.predict(s.x, s.y, s.z)).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Shuffles with `seed` and puts the first `ceil(train_fraction * n)` samples
/// in the training set.
pub fn train_test_split(
    samples: &[RegressionSample],
    train_fraction: f64,
    seed: u64,
) -> (Vec<RegressionSample>, Vec<RegressionSample>) {
    let mut shuffled = samples.to_vec();
    shuffled.shuffle(&mut rng_from_seed(seed));
    let cut = ((train_fraction * samples.len() as f64).ceil() as usize).min(samples.len());
    let test = shuffled.split_off(cut);
    (shuffled, test)
}
