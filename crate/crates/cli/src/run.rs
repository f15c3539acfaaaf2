use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ribsupp::imagery::io::{native_depth, write_atomic};
use ribsupp::imagery::{
    load_image, load_mask_set, save_image, save_mask_set, BitDepthOut, MaskManifest,
};
use ribsupp::metrics::{MetricsReport, DEFAULT_ALPHA, DEFAULT_BETA};
use ribsupp::phantom::{generate_phantom, PhantomSpec};
use ribsupp::suppression::{
    suppress_all, write_trace_dumps, CenterlineGate, PipelineOptions, Reintegration, RibParams,
    SuppressionParams,
};
use ribsupp::tuner::{
    random_grid_search, supervised_objective, unsupervised_objective, SearchConfig,
};
use ribsupp::Image;
use serde::Serialize;

use crate::config::RunConfig;

/// Fixed default seed so runs are reproducible without flags.
pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Parser)]
#[command(
    name = "st-ribsupp",
    version,
    about = "Rib shadow suppression for chest radiographs"
)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "ST_RIBSUPP_THREADS")]
    pub threads: Option<usize>,

    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Remove rib shadows from a radiograph.
    Suppress(SuppressArgs),
    /// Generate a synthetic radiograph with ground truth.
    Phantom(PhantomArgs),
    /// Random grid search over suppression parameters.
    Tune(TuneArgs),
    /// Compare an image against a reference.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Depth {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

impl From<Depth> for BitDepthOut {
    fn from(d: Depth) -> Self {
        match d {
            Depth::Eight => BitDepthOut::Eight,
            Depth::Sixteen => BitDepthOut::Sixteen,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GateArg {
    KeepAbove,
    KeepBelow,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReintegrationArg {
    Paired,
    Trapezoid,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Gaussian sigma along the rib contour, in pixels.
    #[arg(long, allow_negative_numbers = true)]
    pub kappa_t: Option<f64>,
    /// Ratio threshold of the centerline gate.
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Neighbours averaged at the centerline.
    #[arg(long)]
    pub k_center: Option<usize>,
    /// Depth of the border blending band, in pixels.
    #[arg(long, allow_negative_numbers = true)]
    pub s_b: Option<f64>,
    /// Neighbours averaged in the border band.
    #[arg(long)]
    pub k_border: Option<usize>,
    /// Column spacing along the contour, in pixels.
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// Sample spacing along the inward normal, in pixels.
    #[arg(long, allow_negative_numbers = true)]
    pub ds: Option<f64>,
    /// Which side of tau keeps a centerline cell unchanged.
    #[arg(long, value_enum)]
    pub gate: Option<GateArg>,
    /// Reintegration rule along the normal.
    #[arg(long, value_enum)]
    pub reintegration: Option<ReintegrationArg>,
}

impl ParamArgs {
    fn apply(&self, params: &mut SuppressionParams) {
        if let Some(v) = self.kappa_t {
            params.kappa_t = v;
        }
        if let Some(v) = self.tau {
            params.tau = v;
        }
        if let Some(v) = self.k_center {
            params.k_center = v;
        }
        if let Some(v) = self.s_b {
            params.s_b = v;
        }
        if let Some(v) = self.k_border {
            params.k_border = v;
        }
    }

    fn options(&self, cfg: &RunConfig) -> PipelineOptions {
        let mut o = cfg.options.unwrap_or_default();
        if let Some(v) = self.dt {
            o.dt = v;
        }
        if let Some(v) = self.ds {
            o.ds = v;
        }
        if let Some(g) = self.gate {
            o.gate = match g {
                GateArg::KeepAbove => CenterlineGate::KeepAbove,
                GateArg::KeepBelow => CenterlineGate::KeepBelow,
            };
        }
        if let Some(r) = self.reintegration {
            o.reintegration = match r {
                ReintegrationArg::Paired => Reintegration::Paired,
                ReintegrationArg::Trapezoid => Reintegration::Trapezoid,
            };
        }
        o
    }
}

#[derive(Debug, Args)]
pub struct SuppressArgs {
    /// Input radiograph (8- or 16-bit grayscale PNG).
    #[arg(long)]
    pub image: PathBuf,
    /// Rib masks: indexed/grayscale label PNG or JSON manifest.
    #[arg(long)]
    pub masks: PathBuf,
    /// Output soft-tissue PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Output JSON report (default: report.json next to --out).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also write the summed bone-shadow estimate as PNG.
    #[arg(long)]
    pub bone_out: Option<PathBuf>,
    /// Output bit depth (default: that of the input).
    #[arg(long, value_enum)]
    pub bit_depth: Option<Depth>,
    /// Directory for per-rib ST-field dumps of every stage (debugging).
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Phantom parameters as JSON (defaults if absent).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output bit depth (default: 8 when max_value <= 255, else 16).
    #[arg(long, value_enum)]
    pub bit_depth: Option<Depth>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Input radiograph.
    #[arg(long)]
    pub image: PathBuf,
    /// Rib masks: indexed/grayscale label PNG or JSON manifest.
    #[arg(long)]
    pub masks: PathBuf,
    /// Ground-truth soft-tissue image; selects the supervised RMSE objective.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Number of random grid draws in addition to the baseline.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Seed for the draw order.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output trace, one JSON object per candidate.
    #[arg(long)]
    pub trace: PathBuf,
    /// Output JSON with the best parameters.
    #[arg(long)]
    pub best: Option<PathBuf>,
    /// Output soft-tissue PNG produced with the best parameters.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record per-candidate wall time in the trace (makes it non-reproducible).
    #[arg(long)]
    pub timings: bool,
    /// Baseline parameters (candidate 0).
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Image under test.
    #[arg(long)]
    pub image: PathBuf,
    /// Reference image.
    #[arg(long)]
    pub reference: PathBuf,
    /// PSNR weight of the combined loss.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// MS-SSIM weight inside the non-PSNR part of the combined loss.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Output JSON report (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Input or usage problem detected by the front end itself.
#[derive(Debug)]
pub struct UsageError {
    kind: &'static str,
    message: String,
}

impl UsageError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for UsageError {}

/// Maps an error to a diagnostic kind and exit code (2 for bad inputs).
pub fn classify(e: &anyhow::Error) -> (&'static str, u8) {
    for cause in e.chain() {
        if let Some(u) = cause.downcast_ref::<UsageError>() {
            return (u.kind, 2);
        }
        if let Some(r) = cause.downcast_ref::<ribsupp::Error>() {
            return (r.kind(), if r.is_validation() { 2 } else { 1 });
        }
    }
    ("internal", 1)
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(UsageError::new(
            "missing-file",
            format!("file not found: {}", path.display()),
        )
        .into());
    }
    Ok(())
}

fn require_parent(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(p) = parent {
        if !p.is_dir() {
            return Err(UsageError::new(
                "invalid-path",
                format!("output directory does not exist: {}", p.display()),
            )
            .into());
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(UsageError::new("invalid-params", "--threads must be >= 1").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure thread pool")?;
    }
    match cli.command {
        Command::Suppress(a) => suppress(a, &cfg),
        Command::Phantom(a) => phantom(a, &cfg),
        Command::Tune(a) => tune(a, &cfg),
        Command::Evaluate(a) => evaluate(a, &cfg),
    }
}

#[derive(Serialize)]
struct SuppressReport<'a> {
    image: &'a Path,
    masks: &'a Path,
    output: &'a Path,
    width: usize,
    height: usize,
    max_value: f64,
    labels: Vec<u32>,
    params: &'a RibParams,
    options: &'a PipelineOptions,
    bone_max: f64,
    soft_pre_blend_min: f64,
    soft_pre_blend_max: f64,
}

fn suppress(a: SuppressArgs, cfg: &RunConfig) -> Result<()> {
    require_file(&a.image)?;
    require_file(&a.masks)?;
    let report_path = a
        .report
        .clone()
        .unwrap_or_else(|| a.out.parent().unwrap_or(Path::new("")).join("report.json"));
    for p in [Some(&a.out), Some(&report_path), a.bone_out.as_ref()]
        .into_iter()
        .flatten()
    {
        require_parent(p)?;
    }
    if let Some(d) = &a.dump_dir {
        fs::create_dir_all(d).with_context(|| format!("cannot create {}", d.display()))?;
    }

    let mut params = cfg.params.clone().unwrap_or_default();
    a.params.apply(&mut params.default);
    params.default.validate()?;
    for p in params.overrides.values() {
        p.validate()?;
    }
    let mut options = a.params.options(cfg);
    options.keep_fields = a.dump_dir.is_some();

    let img = load_image(&a.image)?;
    let masks = load_mask_set(&a.masks)?;
    img.same_shape_as(masks.shape()).context("image vs masks")?;

    let result = suppress_all(&img, &masks, &params, &options)?;
    let depth = a
        .bit_depth
        .map(BitDepthOut::from)
        .unwrap_or_else(|| native_depth(&img));
    save_image(&result.soft, &a.out, depth)?;
    let bone = result.bone_image();
    if let Some(p) = &a.bone_out {
        save_image(&bone, p, depth)?;
    }
    if let Some(d) = &a.dump_dir {
        write_trace_dumps(&result.fields, d)?;
    }
    let pre = result.soft_pre_blend.data();
    let report = SuppressReport {
        image: &a.image,
        masks: &a.masks,
        output: &a.out,
        width: img.width(),
        height: img.height(),
        max_value: img.max_value(),
        labels: masks.labels(),
        params: &params,
        options: &options,
        bone_max: bone.data().iter().copied().fold(0.0, f64::max),
        soft_pre_blend_min: pre.iter().copied().fold(f64::INFINITY, f64::min),
        soft_pre_blend_max: pre.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    write_json(&report_path, &report)
}

fn phantom(a: PhantomArgs, cfg: &RunConfig) -> Result<()> {
    let mut spec: PhantomSpec = match &a.spec {
        Some(p) => {
            require_file(p)?;
            let text =
                fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| {
                UsageError::new(
                    "config",
                    format!("malformed phantom spec {}: {e}", p.display()),
                )
            })?
        }
        None => cfg.phantom.clone().unwrap_or_default(),
    };
    if let Some(s) = a.seed.or(cfg.seed) {
        spec.seed = s;
    }
    let case = generate_phantom(&spec)?;
    let depth = a
        .bit_depth
        .map(BitDepthOut::from)
        .unwrap_or(if spec.max_value <= 255.0 {
            BitDepthOut::Eight
        } else {
            BitDepthOut::Sixteen
        });
    if spec.max_value > depth.max_value() {
        return Err(UsageError::new(
            "invalid-params",
            format!(
                "phantom max_value {} does not fit a {}-bit PNG",
                spec.max_value,
                depth.bits()
            ),
        )
        .into());
    }
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    let d = &a.out_dir;
    save_image(&case.raw, d.join("raw.png"), depth)?;
    save_image(&case.gt_soft, d.join("gt_soft.png"), depth)?;
    save_image(&case.gt_bone, d.join("gt_bone.png"), depth)?;
    save_mask_set(&case.masks, d.join("masks.png"))?;
    write_json(&d.join("masks.json"), &MaskManifest::from_set(&case.masks))?;
    write_json(&d.join("spec.json"), &spec)
}

#[derive(Serialize)]
struct BestReport<'a> {
    params: SuppressionParams,
    objective: Option<f64>,
    index: usize,
    seed: u64,
    objective_kind: &'a str,
    candidates: usize,
}

fn tune(a: TuneArgs, cfg: &RunConfig) -> Result<()> {
    require_file(&a.image)?;
    require_file(&a.masks)?;
    if let Some(g) = &a.gt {
        require_file(g)?;
    }
    for p in [Some(&a.trace), a.best.as_ref(), a.out.as_ref()]
        .into_iter()
        .flatten()
    {
        require_parent(p)?;
    }
    let mut baseline = cfg.params.as_ref().map(|p| p.default).unwrap_or_default();
    a.params.apply(&mut baseline);
    let search = SearchConfig {
        space: cfg.space.clone().unwrap_or_default(),
        budget: a.budget.or(cfg.budget).unwrap_or(50),
        seed: a.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        baseline,
        options: a.params.options(cfg),
    };

    let img = load_image(&a.image)?;
    let masks = load_mask_set(&a.masks)?;
    img.same_shape_as(masks.shape()).context("image vs masks")?;
    let gt = a.gt.as_ref().map(load_image).transpose()?;
    if let Some(g) = &gt {
        img.same_shape(g).context("image vs ground truth")?;
    }

    let (best, trace) = match &gt {
        Some(g) => random_grid_search(&img, &masks, &search, supervised_objective(g))?,
        None => random_grid_search(&img, &masks, &search, unsupervised_objective)?,
    };
    let trace = if a.timings {
        trace
    } else {
        trace.without_timings()
    };

    let mut lines = Vec::new();
    for e in &trace.entries {
        serde_json::to_writer(&mut lines, e)?;
        lines.push(b'\n');
    }
    write_atomic(&a.trace, &lines)?;
    if let Some(p) = &a.best {
        write_json(
            p,
            &BestReport {
                params: best,
                objective: trace.best_entry().objective,
                index: trace.best,
                seed: trace.seed,
                objective_kind: if gt.is_some() {
                    "supervised-rmse"
                } else {
                    "unsupervised-edge-tv"
                },
                candidates: trace.entries.len(),
            },
        )?;
    }
    if let Some(p) = &a.out {
        let r = suppress_all(&img, &masks, &RibParams::uniform(best), &search.options)?;
        save_image(&r.soft, p, native_depth(&img))?;
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs, cfg: &RunConfig) -> Result<()> {
    require_file(&a.image)?;
    require_file(&a.reference)?;
    if let Some(p) = &a.out {
        require_parent(p)?;
    }
    let x: Image = load_image(&a.image)?;
    let y = load_image(&a.reference)?;
    let alpha = a.alpha.or(cfg.alpha).unwrap_or(DEFAULT_ALPHA);
    let beta = a.beta.or(cfg.beta).unwrap_or(DEFAULT_BETA);
    let report = MetricsReport::compute(&x, &y, alpha, beta)?;
    match &a.out {
        Some(p) => write_json(p, &report),
        None => {
            let mut out = std::io::stdout().lock();
            let text = serde_json::to_string_pretty(&report)?;
            match writeln!(out, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}
