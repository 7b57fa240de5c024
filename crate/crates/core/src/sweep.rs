//! Parameter sweeps over (arm length, ratio, pitch), CSV rows, and the
//! normalized analytic-vs-simulation comparison.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{collision_probability_with_cover, AnalyticError, CoverMode};
use crate::geometry::{ArmGeometry, GeometryError};
use crate::montecarlo::{run_simulation_with, SimConfig, SimError};
use crate::seed::{derive_seed, rng_from_seed};

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str =
    "schema_version,arm_length_mm,ratio,pitch_mm,method,probability,wilson_lower,wilson_upper,seed";

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("need at least 3 points to normalize, got {0}")]
    InsufficientData(usize),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("interrupted")]
    Interrupted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Analytic,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::MonteCarlo => "mc",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analytic" => Ok(Method::Analytic),
            "mc" | "montecarlo" | "monte-carlo" => Ok(Method::MonteCarlo),
            other => Err(format!("unknown method '{other}' (expected analytic|mc)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    /// `steps` evenly spaced values including both ends; one step gives `min`.
    pub fn linspace(&self, steps: usize) -> Vec<f64> {
        match steps {
            0 => Vec::new(),
            1 => vec![self.min],
            _ => (0..steps)
                .map(|k| {
                    if k + 1 == steps {
                        self.max
                    } else {
                        self.min + (self.max - self.min) * (k as f64 / (steps - 1) as f64)
                    }
                })
                .collect(),
        }
    }

    fn check(&self, name: &str) -> Result<(), SweepError> {
        if self.min.is_finite() && self.max.is_finite() && self.min <= self.max {
            Ok(())
        } else {
            Err(SweepError::InvalidSpec(format!(
                "{name} range [{}, {}] must be finite with min <= max",
                self.min, self.max
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sampling {
    /// Cartesian grid, arm length outermost and pitch innermost.
    Grid {
        arm_steps: usize,
        ratio_steps: usize,
        pitch_steps: usize,
    },
    RandomUniform { count: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Central arm length `l1` (mm); the eccentric arm is `ratio * l1`.
    pub arm: f64,
    pub ratio: f64,
    pub pitch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub arm: Range,
    pub ratio: Range,
    pub pitch: Range,
    pub sampling: Sampling,
    /// Everything but geometry and pitch is taken from here.
    pub template: SimConfig,
    pub cover_mode: CoverMode,
    /// Root of the per-point simulation seeds.
    pub seed: u64,
    /// When set, each point's target region is this multiple of its array
    /// circumradius instead of the template's fixed radius.
    pub region_scale: Option<f64>,
}

impl SweepSpec {
    /// Large-array ranges: pitch 24.6–35 mm, ratio 1–2, arm 7.25–14.5 mm,
    /// `count` random points.
    pub fn large_array_random(count: usize, seed: u64) -> Result<Self, SweepError> {
        Ok(Self {
            arm: Range::new(7.25, 14.5),
            ratio: Range::new(1.0, 2.0),
            pitch: Range::new(24.6, 35.0),
            sampling: Sampling::RandomUniform { count, seed },
            template: SimConfig::large_array(7.25, 1.0, 24.6)?,
            cover_mode: CoverMode::FullPatrol,
            seed,
            region_scale: None,
        })
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        self.arm.check("arm length")?;
        self.ratio.check("ratio")?;
        self.pitch.check("pitch")?;
        if self.arm.min <= 0.0 || self.pitch.min <= 0.0 {
            return Err(SweepError::InvalidSpec("arm length and pitch must be positive".into()));
        }
        if self.ratio.min < 1.0 {
            return Err(SweepError::InvalidSpec("ratio must be at least 1".into()));
        }
        if let Some(scale) = self.region_scale {
            if !(scale.is_finite() && scale > 0.0 && self.template.rings > 0) {
                return Err(SweepError::InvalidSpec(
                    "region scale needs a positive factor and at least one ring".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        match self.sampling {
            Sampling::Grid {
                arm_steps,
                ratio_steps,
                pitch_steps,
            } => {
                let mut out = Vec::with_capacity(arm_steps * ratio_steps * pitch_steps);
                for &arm in &self.arm.linspace(arm_steps) {
                    for &ratio in &self.ratio.linspace(ratio_steps) {
                        for &pitch in &self.pitch.linspace(pitch_steps) {
                            out.push(SweepPoint { arm, ratio, pitch });
                        }
                    }
                }
                out
            }
            Sampling::RandomUniform { count, seed } => {
                let mut rng = rng_from_seed(seed);
                let mut draw = |r: &Range| {
                    if r.min == r.max {
                        r.min
                    } else {
                        rng.random_range(r.min..r.max)
                    }
                };
                (0..count)
                    .map(|_| SweepPoint {
                        arm: draw(&self.arm),
                        ratio: draw(&self.ratio),
                        pitch: draw(&self.pitch),
                    })
                    .collect()
            }
        }
    }

    /// Simulation config for point number `k`.
    pub fn config_for(&self, k: usize, p: &SweepPoint) -> Result<SimConfig, SweepError> {
        let region_radius = match self.region_scale {
            Some(scale) => scale * self.template.rings as f64 * p.pitch,
            None => self.template.region_radius,
        };
        Ok(SimConfig {
            geom: ArmGeometry::from_ratio(p.arm, p.ratio)?,
            pitch: p.pitch,
            region_radius,
            root_seed: derive_seed(self.seed, k as u64),
            ..self.template.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub point: SweepPoint,
    pub method: Method,
    /// Raw analytic value, or the Wilson midpoint for simulations.
    pub probability: f64,
    pub wilson: Option<(f64, f64)>,
    pub seed: u64,
}

/// Plain decimal with `sig` significant digits.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i64;
    let decimals = (sig as i64 - 1 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

impl SweepRecord {
    pub fn csv_row(&self) -> String {
        let num = |v: f64| fmt_sig(v, 15);
        let (lo, hi) = self
            .wilson
            .map(|(l, u)| (num(l), num(u)))
            .unwrap_or_default();
        let mut row = String::new();
        let _ = write!(
            row,
            "{SCHEMA_VERSION},{},{},{},{},{},{lo},{hi},{}",
            num(self.point.arm),
            num(self.point.ratio),
            num(self.point.pitch),
            self.method,
            num(self.probability),
            self.seed
        );
        row
    }

    pub fn ndjson_row(&self) -> String {
        let wl = self.wilson.map_or("null".to_string(), |(l, _)| fmt_sig(l, 15));
        let wu = self.wilson.map_or("null".to_string(), |(_, u)| fmt_sig(u, 15));
        format!(
            "{{\"schema_version\":{SCHEMA_VERSION},\"arm_length_mm\":{},\"ratio\":{},\"pitch_mm\":{},\"method\":\"{}\",\"probability\":{},\"wilson_lower\":{wl},\"wilson_upper\":{wu},\"seed\":{}}}",
            fmt_sig(self.point.arm, 15),
            fmt_sig(self.point.ratio, 15),
            fmt_sig(self.point.pitch, 15),
            self.method,
            fmt_sig(self.probability, 15),
            self.seed
        )
    }
}

/// Evaluates one point with the requested methods, analytic first.
pub fn evaluate_point(
    spec: &SweepSpec,
    k: usize,
    point: &SweepPoint,
    methods: &[Method],
    cancel: &AtomicBool,
) -> Result<Vec<SweepRecord>, SweepError> {
    let config = spec.config_for(k, point)?;
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let (probability, wilson) = match method {
            Method::Analytic => {
                let r = collision_probability_with_cover(&config.geom, &config.safety, point.pitch, spec.cover_mode)?;
                (r.probability, None)
            }
            Method::MonteCarlo => match run_simulation_with(&config, cancel) {
                Ok(s) => (s.reported, Some((s.wilson_lower, s.wilson_upper))),
                Err(SimError::Interrupted) => return Err(SweepError::Interrupted),
                Err(e) => return Err(e.into()),
            },
        };
        out.push(SweepRecord {
            point: *point,
            method,
            probability,
            wilson,
            seed: config.root_seed,
        });
    }
    Ok(out)
}

/// Runs the sweep point by point, handing each finished record to `sink`.
/// Stops with [`SweepError::Interrupted`] once `cancel` is raised; records
/// already handed over are complete.
pub fn run_sweep<F>(spec: &SweepSpec, methods: &[Method], cancel: &AtomicBool, mut sink: F) -> Result<(), SweepError>
where
    F: FnMut(&SweepRecord) -> std::io::Result<()>,
{
    spec.validate()?;
    for (k, point) in spec.points().iter().enumerate() {
        if cancel.load(Ordering::Relaxed) {
            return Err(SweepError::Interrupted);
        }
        for record in evaluate_point(spec, k, point, methods, cancel)? {
            sink(&record).map_err(|e| SweepError::InvalidSpec(format!("write failed: {e}")))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub point: SweepPoint,
    pub mc_probability: f64,
    pub analytic_raw: f64,
    pub mc_normalized: f64,
    pub analytic_normalized: f64,
    /// `mc_normalized - analytic_normalized`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub points: Vec<ValidationPoint>,
    pub residual_mean: f64,
    /// Population variance of the residuals.
    pub residual_variance: f64,
    pub spearman: f64,
}

impl ValidationReport {
    pub const SCOPE: &'static str = "min-max normalization over all points of this sweep";

    pub fn csv(&self) -> String {
        let mut out = String::from(
            "arm_length_mm,ratio,pitch_mm,mc_probability,analytic_raw,mc_normalized,analytic_normalized,residual\n",
        );
        for p in &self.points {
            let n = |v: f64| fmt_sig(v, 15);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                n(p.point.arm),
                n(p.point.ratio),
                n(p.point.pitch),
                n(p.mc_probability),
                n(p.analytic_raw),
                n(p.mc_normalized),
                n(p.analytic_normalized),
                n(p.residual)
            );
        }
        out
    }
}

/// Maps to `[0, 1]` by `(v - min) / (max - min)`; a constant input maps to 0.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect()
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of the tie-averaged ranks; 0 when either side is
/// constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Compares simulated and analytic values point by point.
pub fn validate(entries: &[(SweepPoint, f64, f64)]) -> Result<ValidationReport, SweepError> {
    if entries.len() < 3 {
        return Err(SweepError::InsufficientData(entries.len()));
    }
    let mc: Vec<f64> = entries.iter().map(|e| e.1).collect();
    let an: Vec<f64> = entries.iter().map(|e| e.2).collect();
    let (mc_n, an_n) = (min_max_normalize(&mc), min_max_normalize(&an));
    let points: Vec<ValidationPoint> = entries
        .iter()
        .enumerate()
        .map(|(k, e)| ValidationPoint {
            point: e.0,
            mc_probability: e.1,
            analytic_raw: e.2,
            mc_normalized: mc_n[k],
            analytic_normalized: an_n[k],
            residual: mc_n[k] - an_n[k],
        })
        .collect();
    let n = points.len() as f64;
    let residual_mean = points.iter().map(|p| p.residual).sum::<f64>() / n;
    let residual_variance = points
        .iter()
        .map(|p| (p.residual - residual_mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(ValidationReport {
        points,
        residual_mean,
        residual_variance,
        spearman: spearman(&mc, &an),
    })
}

/// Pairs analytic and simulation records of the same point, in first-seen
/// order. Points missing either method are skipped.
pub fn pair_records(records: &[SweepRecord]) -> Vec<(SweepPoint, f64, f64)> {
    let mut out: Vec<(SweepPoint, Option<f64>, Option<f64>)> = Vec::new();
    for r in records {
        let slot = match out.iter().position(|e| e.0 == r.point) {
            Some(i) => i,
            None => {
                out.push((r.point, None, None));
                out.len() - 1
            }
        };
        match r.method {
            Method::MonteCarlo => out[slot].1 = Some(r.probability),
            Method::Analytic => out[slot].2 = Some(r.probability),
        }
    }
    out.into_iter()
        .filter_map(|(p, m, a)| Some((p, m?, a?)))
        .collect()
}
