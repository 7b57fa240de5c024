mod config;
mod heatmap;

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fieldsim_core::analytic::{collision_probability_with_cover, CoverMode};
use fieldsim_core::array::{hex_count, neighbor_pairs_of, rings_for_count, HexArray};
use fieldsim_core::batch::{batch_pair_distances, naive_all_pairs, SegmentBatch};
use fieldsim_core::distance::Kernel;
use fieldsim_core::geometry::{eccentric_arm_segment, ArmGeometry, Elbow, Pose, SafetyModel};
use fieldsim_core::montecarlo::{
    run_simulation_with, FinalTargetRule, SimConfig, SimError, TargetDistribution,
};
use fieldsim_core::regression::{
    fit_ridge, fit_ridge_with, r_squared, train_test_split, RegressionSample, Standardization,
};
use fieldsim_core::seed::rng_from_seed;
use fieldsim_core::sweep::{
    fmt_sig, pair_records, run_sweep, validate, Method, Range, Sampling, SweepError, SweepPoint,
    SweepRecord, SweepSpec, CSV_HEADER,
};
use rand::Rng;

use config::ConfigFile;

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    InsufficientData(String),
    Interrupted,
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::InsufficientData(_) => 3,
            CliError::Interrupted => 130,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::InsufficientData(m) | CliError::Runtime(m) => f.write_str(m),
            CliError::Interrupted => f.write_str("interrupted"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Interrupted => CliError::Interrupted,
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Interrupted => CliError::Interrupted,
            SweepError::InsufficientData(_) => CliError::InsufficientData(e.to_string()),
            SweepError::Sim(s) => s.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Parser)]
#[command(name = "fieldsim", version, about = "Collision probability of theta-phi fiber positioner arrays")]
struct Cli {
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat key = value file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (defaults to stdout for tables).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Row format for tabular output: csv or ndjson.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Ndjson,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "ndjson" => Ok(Format::Ndjson),
            other => Err(format!("unknown format '{other}' (expected csv|ndjson)")),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form collision model.
    Analytic {
        #[command(flatten)]
        geom: GeomArgs,
        /// Cover area: ring (thin 2d ring) or full (inflated patrol annulus).
        #[arg(long)]
        cover_mode: Option<CoverMode>,
    },
    /// Run the Monte Carlo simulation for one configuration.
    Simulate {
        #[command(flatten)]
        geom: GeomArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Evaluate many parameter points and write one CSV row per point and method.
    Sweep {
        #[command(flatten)]
        sweep: SweepArgs,
        /// analytic, mc or both.
        #[arg(long)]
        method: Option<String>,
        /// Directory for heatmap images (grid sweeps only).
        #[arg(long)]
        heatmaps: Option<PathBuf>,
    },
    /// Compare normalized analytic and Monte Carlo results over a sweep.
    Validate {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Fit the quadratic surrogate to a sweep CSV.
    Fit {
        /// Sweep CSV with arm length, ratio, pitch and probability columns.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
        /// Seed of the train/test shuffle (defaults to --seed).
        #[arg(long)]
        split_seed: Option<u64>,
        #[arg(long, allow_negative_numbers = true)]
        test_fraction: Option<f64>,
        /// Rows to use when a method column is present.
        #[arg(long)]
        method: Option<Method>,
        /// Fit on raw inputs instead of z-scores.
        #[arg(long)]
        raw: bool,
    },
    /// Time the parallel batch kernel against the naive reference.
    Bench {
        #[arg(long)]
        positioners: Option<usize>,
        #[arg(long)]
        kernel: Option<Kernel>,
        #[arg(long, allow_negative_numbers = true)]
        pitch: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        arm: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        ratio: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        threshold: Option<f64>,
        /// Seed of the random poses (defaults to --seed).
        #[arg(long)]
        pose_seed: Option<u64>,
        /// Skip the naive reference.
        #[arg(long)]
        no_naive: bool,
    },
}

#[derive(Args, Clone)]
struct GeomArgs {
    /// Central arm length (mm); use with --l2.
    #[arg(long, allow_negative_numbers = true)]
    l1: Option<f64>,
    /// Eccentric arm length (mm); use with --l1.
    #[arg(long, allow_negative_numbers = true)]
    l2: Option<f64>,
    /// Central arm length (mm); use with --ratio.
    #[arg(long, allow_negative_numbers = true)]
    arm: Option<f64>,
    /// Eccentric over central arm length.
    #[arg(long, allow_negative_numbers = true)]
    ratio: Option<f64>,
    /// Safety clearance around the eccentric arm (mm).
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
    /// Pairwise collision threshold (mm).
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    /// Step angle (rad), for the displacement term of the safe distance.
    #[arg(long, allow_negative_numbers = true)]
    delta_theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pitch: Option<f64>,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long)]
    rings: Option<usize>,
    #[arg(long)]
    targets: Option<usize>,
    /// Target disk radius (mm); defaults to 1.5x the array circumradius.
    #[arg(long, allow_negative_numbers = true)]
    region: Option<f64>,
    #[arg(long)]
    iters: Option<u64>,
    /// uniform, poisson or poisson-disk.
    #[arg(long)]
    distribution: Option<TargetDistribution>,
    /// exact or discrete:N.
    #[arg(long)]
    kernel: Option<Kernel>,
    #[arg(long)]
    elbow: Option<Elbow>,
    /// random or nearest assigned target.
    #[arg(long)]
    final_target: Option<FinalTargetRule>,
    /// Normal quantile of the Wilson interval.
    #[arg(long, allow_negative_numbers = true)]
    z: Option<f64>,
    /// Stop once the Wilson half-width is at most this.
    #[arg(long, allow_negative_numbers = true)]
    early_stop: Option<f64>,
}

#[derive(Args, Clone)]
struct SweepArgs {
    /// min:max of the central arm length (mm).
    #[arg(long)]
    arm_range: Option<String>,
    #[arg(long)]
    ratio_range: Option<String>,
    #[arg(long)]
    pitch_range: Option<String>,
    /// Number of uniformly random points.
    #[arg(long, conflicts_with = "grid")]
    random: Option<usize>,
    /// Grid steps as ARM,RATIO,PITCH.
    #[arg(long)]
    grid: Option<String>,
    /// Seed of the random points (defaults to --seed).
    #[arg(long)]
    sample_seed: Option<u64>,
    #[arg(long)]
    cover_mode: Option<CoverMode>,
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    /// Target disk radius as a multiple of each array's circumradius
    /// (used when --region is not given).
    #[arg(long, allow_negative_numbers = true)]
    region_scale: Option<f64>,
    #[command(flatten)]
    sim: SimArgs,
}

struct Ctx {
    cfg: ConfigFile,
    seed: u64,
    out: Option<PathBuf>,
    format: Format,
}

fn parse_range(s: &str) -> Result<Range, CliError> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("range '{s}' must look like min:max")))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| usage(format!("range '{s}': {e}")));
    Ok(Range::new(p(a)?, p(b)?))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(usage(format!("{name} must be positive, got {v}")))
    }
}

fn resolve_geometry(g: &GeomArgs, cfg: &ConfigFile) -> Result<(ArmGeometry, SafetyModel, f64), CliError> {
    let pitch = positive("pitch", cfg.or("pitch", g.pitch, 25.6)?)?;
    let l1 = cfg.get("l1", g.l1)?;
    let l2 = cfg.get("l2", g.l2)?;
    let geom = match (l1, l2) {
        (Some(l1), Some(l2)) => ArmGeometry::new(l1, l2),
        (None, None) => ArmGeometry::from_ratio(cfg.or("arm", g.arm, 8.25)?, cfg.or("ratio", g.ratio, 1.0)?),
        _ => return Err(usage("--l1 and --l2 must be given together")),
    }
    .map_err(usage)?;
    let safety = SafetyModel::new(
        cfg.or("d", g.d, 4.5)?,
        cfg.or("delta-theta", g.delta_theta, 0.0)?,
        cfg.or("threshold", g.threshold, 4.5)?,
    )
    .map_err(usage)?;
    Ok((geom, safety, pitch))
}

fn sim_config(
    s: &SimArgs,
    ctx: &Ctx,
    geom: ArmGeometry,
    safety: SafetyModel,
    pitch: f64,
    default_rings: usize,
) -> Result<SimConfig, CliError> {
    let cfg = &ctx.cfg;
    let rings = cfg.or("rings", s.rings, default_rings)?;
    let region = match cfg.get("region", s.region)? {
        Some(r) => positive("region", r)?,
        None => (1.5 * rings as f64 * pitch).max(1.5 * geom.reach_max()),
    };
    let config = SimConfig {
        pitch,
        rings,
        geom,
        safety,
        iterations_max: cfg.or("iters", s.iters, 6000)?,
        z: cfg.or("z", s.z, 1.96)?,
        target_count: cfg.or("targets", s.targets, 20_000)?,
        region_radius: region,
        distribution: cfg.or("distribution", s.distribution, TargetDistribution::default())?,
        root_seed: ctx.seed,
        kernel: cfg.or("kernel", s.kernel, Kernel::default())?,
        elbow: cfg.or("elbow", s.elbow, Elbow::default())?,
        final_target: cfg.or("final-target", s.final_target, FinalTargetRule::default())?,
        early_stop_half_width: cfg.get("early-stop", s.early_stop)?,
    };
    config.validate().map_err(usage)?;
    Ok(config)
}

fn open_out(ctx: &Ctx) -> Result<Box<dyn Write>, CliError> {
    Ok(match &ctx.out {
        Some(p) => Box::new(BufWriter::new(
            std::fs::File::create(p).map_err(|e| usage(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_header(w: &mut dyn Write, format: Format) -> std::io::Result<()> {
    match format {
        Format::Csv => writeln!(w, "{CSV_HEADER}"),
        Format::Ndjson => Ok(()),
    }
}

fn write_record(w: &mut dyn Write, format: Format, r: &SweepRecord) -> std::io::Result<()> {
    match format {
        Format::Csv => writeln!(w, "{}", r.csv_row()),
        Format::Ndjson => writeln!(w, "{}", r.ndjson_row()),
    }
}

fn cmd_analytic(ctx: &Ctx, geom_args: &GeomArgs, cover: Option<CoverMode>) -> Result<(), CliError> {
    let (geom, safety, pitch) = resolve_geometry(geom_args, &ctx.cfg)?;
    let mode = ctx.cfg.or("cover-mode", cover, CoverMode::default())?;
    let r = collision_probability_with_cover(&geom, &safety, pitch, mode).map_err(usage)?;
    println!("interaction        {:?}", r.interaction);
    println!("cover mode         {}", r.cover_mode);
    println!("probability (raw)  {}", fmt_sig(r.probability, 12));
    println!("probability        {}", fmt_sig(r.probability_clamped, 12));
    println!("S_cover            {}", fmt_sig(r.areas.s_cover, 12));
    println!("ring radii         {} {}", fmt_sig(r.areas.r_inner, 12), fmt_sig(r.areas.r_outer, 12));
    for c in &r.areas.classes {
        println!(
            "class d={} x{}  S_conflict={} S_collision={} term={}",
            fmt_sig(c.distance, 8),
            c.multiplicity,
            fmt_sig(c.s_conflict, 10),
            fmt_sig(c.s_collision, 10),
            fmt_sig(c.term, 10)
        );
    }
    if ctx.out.is_some() {
        let record = SweepRecord {
            point: SweepPoint {
                arm: geom.l1(),
                ratio: geom.ratio(),
                pitch,
            },
            method: Method::Analytic,
            probability: r.probability,
            wilson: None,
            seed: ctx.seed,
        };
        let mut w = open_out(ctx)?;
        write_header(&mut *w, ctx.format)?;
        write_record(&mut *w, ctx.format, &record)?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_simulate(ctx: &Ctx, geom_args: &GeomArgs, sim: &SimArgs) -> Result<(), CliError> {
    let (geom, safety, pitch) = resolve_geometry(geom_args, &ctx.cfg)?;
    let config = sim_config(sim, ctx, geom, safety, pitch, 2)?;
    let start = Instant::now();
    let s = run_simulation_with(&config, &INTERRUPTED)?;
    eprintln!("elapsed {:.3} s", start.elapsed().as_secs_f64());
    println!("positioners        {}", hex_count(config.rings));
    println!("region radius      {}", fmt_sig(config.region_radius, 12));
    println!("iterations         {}", s.iterations);
    println!("p_hat              {}", fmt_sig(s.p_hat, 12));
    println!("wilson lower       {}", fmt_sig(s.wilson_lower, 12));
    println!("wilson upper       {}", fmt_sig(s.wilson_upper, 12));
    println!("reported           {}", fmt_sig(s.reported, 12));
    println!("colliding positioners {}", s.colliding_positioner_count);
    println!("assigned positioners  {}", s.assigned_positioner_count);
    println!("colliding pairs       {}", s.colliding_pair_count);
    println!("evaluated pairs       {}", s.evaluated_pair_count);
    println!("pair proportion       {}", fmt_sig(s.pair_proportion, 12));
    println!("iterations with collision {}", s.iterations_with_collision);
    if ctx.out.is_some() {
        let record = SweepRecord {
            point: SweepPoint {
                arm: geom.l1(),
                ratio: geom.ratio(),
                pitch,
            },
            method: Method::MonteCarlo,
            probability: s.reported,
            wilson: Some((s.wilson_lower, s.wilson_upper)),
            seed: config.root_seed,
        };
        let mut w = open_out(ctx)?;
        write_header(&mut *w, ctx.format)?;
        write_record(&mut *w, ctx.format, &record)?;
        w.flush()?;
    }
    Ok(())
}

fn sweep_spec(ctx: &Ctx, a: &SweepArgs) -> Result<SweepSpec, CliError> {
    let cfg = &ctx.cfg;
    let range = |key: &str, flag: &Option<String>, default: Range| -> Result<Range, CliError> {
        match cfg.get::<String>(key, flag.clone())? {
            Some(s) => parse_range(&s),
            None => Ok(default),
        }
    };
    let arm = range("arm-range", &a.arm_range, Range::new(7.25, 14.5))?;
    let ratio = range("ratio-range", &a.ratio_range, Range::new(1.0, 2.0))?;
    let pitch = range("pitch-range", &a.pitch_range, Range::new(24.6, 35.0))?;
    let sample_seed = cfg.or("sample-seed", a.sample_seed, ctx.seed)?;
    let grid = cfg.get::<String>("grid", a.grid.clone())?;
    let random = cfg.get::<usize>("random", a.random)?;
    let sampling = match (grid, random) {
        (Some(_), Some(_)) if a.grid.is_some() == a.random.is_some() => {
            return Err(usage("--grid and --random are mutually exclusive"))
        }
        (Some(g), r) if a.grid.is_some() || r.is_none() => {
            let steps: Vec<usize> = g
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| usage(format!("--grid '{g}': {e}")))?;
            let [arm_steps, ratio_steps, pitch_steps] = steps[..] else {
                return Err(usage(format!("--grid '{g}' needs three step counts")));
            };
            Sampling::Grid {
                arm_steps,
                ratio_steps,
                pitch_steps,
            }
        }
        (_, r) => Sampling::RandomUniform {
            count: r.unwrap_or(80),
            seed: sample_seed,
        },
    };
    let safety = SafetyModel::fixed(cfg.or("d", a.d, 4.5)?, cfg.or("threshold", a.threshold, 4.5)?).map_err(usage)?;
    let geom = ArmGeometry::from_ratio(arm.min.max(f64::MIN_POSITIVE), ratio.min.max(1.0)).map_err(usage)?;
    let pitch0 = pitch.min.max(f64::MIN_POSITIVE);
    let template = sim_config(&a.sim, ctx, geom, safety, pitch0, 12)?;
    let explicit_region = cfg.get::<f64>("region", a.sim.region)?.is_some();
    let region_scale = match cfg.get("region-scale", a.region_scale)? {
        Some(s) => Some(s),
        None if explicit_region => None,
        None => Some(1.5),
    };
    let spec = SweepSpec {
        arm,
        ratio,
        pitch,
        sampling,
        template,
        cover_mode: cfg.or("cover-mode", a.cover_mode, CoverMode::default())?,
        seed: ctx.seed,
        region_scale,
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_methods(s: &str) -> Result<Vec<Method>, CliError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "both" => Ok(vec![Method::Analytic, Method::MonteCarlo]),
        other => Ok(vec![other.parse::<Method>().map_err(usage)?]),
    }
}

fn collect_sweep(
    spec: &SweepSpec,
    methods: &[Method],
    mut w: Option<&mut dyn Write>,
    format: Format,
) -> (Vec<SweepRecord>, Result<(), CliError>) {
    let mut records = Vec::new();
    if let Some(w) = w.as_deref_mut() {
        if let Err(e) = write_header(w, format).and_then(|_| w.flush()) {
            return (records, Err(e.into()));
        }
    }
    let result = run_sweep(spec, methods, &INTERRUPTED, |r| {
        if let Some(w) = w.as_deref_mut() {
            write_record(w, format, r)?;
            w.flush()?;
        }
        records.push(r.clone());
        Ok(())
    });
    (records, result.map_err(CliError::from))
}

fn cmd_sweep(ctx: &Ctx, a: &SweepArgs, method: &Option<String>, heatmaps: &Option<PathBuf>) -> Result<(), CliError> {
    let spec = sweep_spec(ctx, a)?;
    let methods = parse_methods(&ctx.cfg.or("method", method.clone(), "both".to_string())?)?;
    let heatmaps = ctx.cfg.get::<PathBuf>("heatmaps", heatmaps.clone())?;
    if heatmaps.is_some() && !matches!(spec.sampling, Sampling::Grid { .. }) {
        return Err(usage("--heatmaps needs a --grid sweep"));
    }
    let mut w = open_out(ctx)?;
    let (records, result) = collect_sweep(&spec, &methods, Some(&mut *w), ctx.format);
    w.flush()?;
    result?;
    if let Some(dir) = heatmaps {
        for &m in &methods {
            for path in heatmap::write_heatmaps(&dir, &records, m)? {
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn cmd_validate(ctx: &Ctx, a: &SweepArgs) -> Result<(), CliError> {
    let spec = sweep_spec(ctx, a)?;
    let (records, result) = collect_sweep(&spec, &[Method::Analytic, Method::MonteCarlo], None, ctx.format);
    result?;
    let report = validate(&pair_records(&records))?;
    let widths: Vec<f64> = records
        .iter()
        .filter_map(|r| r.wilson.map(|(l, u)| (u - l) / 2.0))
        .collect();
    let mean_width = widths.iter().sum::<f64>() / widths.len().max(1) as f64;
    println!("scope              {}", fieldsim_core::sweep::ValidationReport::SCOPE);
    println!("cover mode         {}", spec.cover_mode);
    println!("points             {}", report.points.len());
    println!("residual mean      {}", fmt_sig(report.residual_mean, 10));
    println!("residual variance  {}", fmt_sig(report.residual_variance, 10));
    println!("spearman           {}", fmt_sig(report.spearman, 10));
    println!("mean wilson half-width {}", fmt_sig(mean_width, 10));
    if ctx.out.is_some() {
        let mut w = open_out(ctx)?;
        w.write_all(report.csv().as_bytes())?;
        w.flush()?;
    }
    Ok(())
}

fn read_samples(path: &Path, method: Method) -> Result<Vec<RegressionSample>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader.headers().map_err(usage)?.clone();
    let column = |names: &[&str]| -> Result<usize, CliError> {
        headers
            .iter()
            .position(|h| names.contains(&h.trim()))
            .ok_or_else(|| usage(format!("missing column '{}'", names[0])))
    };
    let x = column(&["arm_length", "arm_length_mm"])?;
    let y = column(&["ratio"])?;
    let z = column(&["pitch", "pitch_mm"])?;
    let f = column(&["probability"])?;
    let m = headers.iter().position(|h| h.trim() == "method");
    let mut out = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row = row.map_err(|e| usage(format!("row {}: {e}", n + 2)))?;
        if let Some(m) = m {
            if row.get(m).map(str::trim) != Some(method.as_str()) {
                continue;
            }
        }
        let num = |k: usize| -> Result<f64, CliError> {
            let cell = row.get(k).unwrap_or("").trim();
            cell.parse::<f64>()
                .map_err(|e| usage(format!("row {} column '{}': '{cell}': {e}", n + 2, &headers[k])))
        };
        out.push(RegressionSample::new(num(x)?, num(y)?, num(z)?, num(f)?));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    ctx: &Ctx,
    input: &Path,
    lambda: Option<f64>,
    split_seed: Option<u64>,
    test_fraction: Option<f64>,
    method: Option<Method>,
    raw: bool,
) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let lambda = cfg.or("lambda", lambda, 1e-3)?;
    let split_seed = cfg.or("split-seed", split_seed, ctx.seed)?;
    let test_fraction = cfg.or("test-fraction", test_fraction, 0.25)?;
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(usage(format!("test fraction must lie in [0, 1), got {test_fraction}")));
    }
    let method = cfg.or("method", method, Method::MonteCarlo)?;
    let raw = cfg.switch("raw", raw)?;
    let samples = read_samples(input, method)?;
    let (train, test) = train_test_split(&samples, 1.0 - test_fraction, split_seed);
    let model = if raw {
        fit_ridge_with(&train, lambda, Standardization::IDENTITY)
    } else {
        fit_ridge(&train, lambda)
    }
    .map_err(|e| CliError::InsufficientData(e.to_string()))?;
    println!("samples            {} train, {} test", train.len(), test.len());
    println!("lambda             {}", fmt_sig(lambda, 10));
    match r_squared(&model, &train) {
        Ok(r) => println!("train R^2          {}", fmt_sig(r, 10)),
        Err(e) => println!("train R^2          n/a ({e})"),
    }
    match r_squared(&model, &test) {
        Ok(r) => println!("test R^2           {}", fmt_sig(r, 10)),
        Err(e) => println!("test R^2           n/a ({e})"),
    }
    let names = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
    for (n, c) in names.iter().zip(&model.coefficients) {
        println!("{n}                  {}", fmt_sig(*c, 12));
    }
    if let Some(path) = &ctx.out {
        std::fs::write(path, format!("{}\n", model.to_record()))
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    } else {
        println!("model              {}", model.to_record());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    ctx: &Ctx,
    positioners: Option<usize>,
    kernel: Option<Kernel>,
    pitch: Option<f64>,
    arm: Option<f64>,
    ratio: Option<f64>,
    threshold: Option<f64>,
    pose_seed: Option<u64>,
    no_naive: bool,
) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let count = cfg.or("positioners", positioners, 4000)?;
    if count < 2 {
        return Err(usage("bench needs at least 2 positioners"));
    }
    let kernel = cfg.or("kernel", kernel, Kernel::default())?.validate().map_err(usage)?;
    let Kernel::Discrete(n) = kernel else {
        return Err(usage("bench compares discrete kernels; use --kernel discrete:N"));
    };
    let pitch = positive("pitch", cfg.or("pitch", pitch, 25.6)?)?;
    let geom = ArmGeometry::from_ratio(cfg.or("arm", arm, 8.25)?, cfg.or("ratio", ratio, 1.0)?).map_err(usage)?;
    let threshold = cfg.or("threshold", threshold, 4.5)?;
    let pose_seed = cfg.or("pose-seed", pose_seed, ctx.seed)?;
    let naive = !(no_naive || cfg.get::<bool>("naive", None)? == Some(false));

    let array = HexArray::build(pitch, rings_for_count(count), geom, SafetyModel::default()).map_err(usage)?;
    let centers = &array.centers()[..count];
    let mut rng = rng_from_seed(pose_seed);
    let segments: Vec<_> = centers
        .iter()
        .map(|&c| {
            let pose = Pose::new(
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                rng.random_range(0.0..std::f64::consts::PI),
            );
            eccentric_arm_segment(&geom, c, pose)
        })
        .collect();

    let start = Instant::now();
    let shell = neighbor_pairs_of(centers, pitch * (1.0 + 1e-6));
    let pairs: Vec<(u32, u32)> = shell.pairs.iter().map(|p| (p.i as u32, p.j as u32)).collect();
    let batch = SegmentBatch::from_segments(&segments, pairs).map_err(usage)?;
    let report = batch_pair_distances(&batch, kernel, threshold).map_err(usage)?;
    let batch_time = start.elapsed().as_secs_f64();
    let hits = report.flags.iter().filter(|&&f| f).count();

    println!("positioners        {count}");
    println!("first-shell pairs  {}", batch.pairs().len());
    println!("kernel             {kernel}");
    println!("workers            {}", rayon::current_num_threads());
    println!("batch time         {batch_time:.6} s (kernel {:.6} s)", report.elapsed.as_secs_f64());
    println!("batch collisions   {hits}");
    let checksum = report.distances.iter().fold(0u64, |h, d| h.rotate_left(5) ^ d.to_bits());
    println!("distance checksum  {checksum:016x}");
    if naive {
        let start = Instant::now();
        let naive_hits = naive_all_pairs(&segments, n, threshold).map_err(usage)?;
        let naive_time = start.elapsed().as_secs_f64();
        println!("naive time         {naive_time:.6} s");
        println!("naive collisions   {}", naive_hits.len());
        println!("speedup            {:.1}x", naive_time / batch_time);
        let batch_hits: Vec<((u32, u32), f64)> = batch
            .pairs()
            .iter()
            .zip(&report.distances)
            .filter(|(_, &d)| d < threshold)
            .map(|(&(i, j), &d)| ((i.min(j), i.max(j)), d))
            .collect();
        let mut sorted = batch_hits.clone();
        sorted.sort_by_key(|h| h.0);
        let agree = sorted.len() == naive_hits.len()
            && sorted
                .iter()
                .zip(&naive_hits)
                .all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= 1e-9);
        println!("verdicts agree     {}", if agree { "yes" } else { "no" });
        if !agree {
            return Err(CliError::Runtime("batch and naive verdicts differ".into()));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let workers = cfg.or("workers", cli.workers, 0)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let ctx = Ctx {
        seed: cfg.or("seed", cli.seed, 0)?,
        out: cfg.get("out", cli.out.clone())?,
        format: cfg.or("format", cli.format, Format::Csv)?,
        cfg,
    };
    match &cli.command {
        Command::Analytic { geom, cover_mode } => cmd_analytic(&ctx, geom, *cover_mode),
        Command::Simulate { geom, sim } => cmd_simulate(&ctx, geom, sim),
        Command::Sweep { sweep, method, heatmaps } => cmd_sweep(&ctx, sweep, method, heatmaps),
        Command::Validate { sweep } => cmd_validate(&ctx, sweep),
        Command::Fit {
            input,
            lambda,
            split_seed,
            test_fraction,
            method,
            raw,
        } => cmd_fit(&ctx, input, *lambda, *split_seed, *test_fraction, *method, *raw),
        Command::Bench {
            positioners,
            kernel,
            pitch,
            arm,
            ratio,
            threshold,
            pose_seed,
            no_naive,
        } => cmd_bench(&ctx, *positioners, *kernel, *pitch, *arm, *ratio, *threshold, *pose_seed, *no_naive),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = ctrlc::set_handler(|| INTERRUPTED.store(true, Ordering::SeqCst)) {
        log::warn!("cannot install interrupt handler: {e}");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
