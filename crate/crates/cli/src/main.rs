//! Command-line front end: suppress, eval, density, simulate and sweep.
//!
//! Data goes to `--output` (or standard output); progress and warnings go
//! to standard error. Exit codes: 0 success, 1 usage error, 2 data error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crowdnms::dataset::generate_dataset;
use crowdnms::formats::{
    self, AnnotationSet, CurveRecord, DetectionSet, Loaded, Report,
};
use crowdnms::pipeline::{annotate_set_densities, evaluate_set, suppress_set};
use crowdnms::sweep::{run_sweep, write_sweep_csv, MethodSpec, SweepOptions};
use crowdnms::{TOOL_NAME, TOOL_VERSION};
use crowdnms_core::density::{DensitySource, DEFAULT_SELF_ESTIMATE_SCORE_FLOOR};
use crowdnms_core::evaluation::DEFAULT_MATCH_IOU;
use crowdnms_core::suppression::{RescoreMethod, SuppressionConfig};
use crowdnms_core::synth::{derive_seed, DetectorParams, SceneParams};

/// Stream tags for deriving the scene and detector seeds from `--seed`.
const SCENE_STREAM: u64 = 0;
const DETECTOR_STREAM: u64 = 1;

#[derive(Parser)]
#[command(
    name = "crowdnms",
    version,
    about = "Crowd-aware NMS toolkit: suppression, evaluation and synthetic crowd datasets"
)]
struct Cli {
    /// Worker threads for per-image stages.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Master seed for the simulator streams.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Output path for the command's data (standard output when omitted).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply NMS to a detection file.
    Suppress(SuppressArgs),
    /// Evaluate detections against annotations.
    Eval(EvalArgs),
    /// Annotate ground truth with pairwise-overlap densities.
    Density(DensityArgs),
    /// Generate a synthetic crowd dataset (annotations + detections).
    Simulate(SimulateArgs),
    /// Run a method x threshold grid and emit a CSV table.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Greedy,
    SoftLinear,
    SoftGaussian,
    Adaptive,
    AdaptiveSoftLinear,
    AdaptiveSoftGaussian,
}

impl MethodArg {
    fn spec(self) -> MethodSpec {
        let (method, adaptive) = match self {
            MethodArg::Greedy => (RescoreMethod::Greedy, false),
            MethodArg::SoftLinear => (RescoreMethod::SoftLinear, false),
            MethodArg::SoftGaussian => (RescoreMethod::SoftGaussian, false),
            MethodArg::Adaptive => (RescoreMethod::Greedy, true),
            MethodArg::AdaptiveSoftLinear => (RescoreMethod::SoftLinear, true),
            MethodArg::AdaptiveSoftGaussian => (RescoreMethod::SoftGaussian, true),
        };
        MethodSpec { method, adaptive }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DensitySourceArg {
    /// Transfer densities from best-matching annotated objects.
    Oracle,
    /// Estimate from co-detections in the raw detection set.
    SelfEstimate,
    /// Use the densities already present in the detection file.
    Provided,
}

impl DensitySourceArg {
    fn source(self, self_score_floor: f64) -> DensitySource {
        match self {
            DensitySourceArg::Oracle => DensitySource::Oracle,
            DensitySourceArg::SelfEstimate => DensitySource::SelfEstimate {
                score_floor: self_score_floor,
            },
            DensitySourceArg::Provided => DensitySource::Provided,
        }
    }

    fn label(self) -> &'static str {
        match self {
            DensitySourceArg::Oracle => "oracle",
            DensitySourceArg::SelfEstimate => "self-estimate",
            DensitySourceArg::Provided => "provided",
        }
    }
}

#[derive(Args)]
struct SuppressArgs {
    /// Input detection file (JSON lines).
    #[arg(long)]
    detections: PathBuf,

    /// Annotation file; required by `--density-source oracle`.
    #[arg(long)]
    annotations: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = MethodArg::Greedy)]
    method: MethodArg,

    /// Base overlap threshold.
    #[arg(long, default_value_t = 0.5)]
    nt: f64,

    /// Gaussian decay width (soft-gaussian only).
    #[arg(long, default_value_t = SuppressionConfig::DEFAULT_SIGMA)]
    sigma: f64,

    /// Drop rescored detections below this score.
    #[arg(long, default_value_t = SuppressionConfig::DEFAULT_SCORE_FLOOR)]
    score_floor: f64,

    /// Where adaptive densities come from (default: the input file).
    #[arg(long, value_enum)]
    density_source: Option<DensitySourceArg>,

    /// Co-detection score floor for `--density-source self-estimate`.
    #[arg(long, default_value_t = DEFAULT_SELF_ESTIMATE_SCORE_FLOOR)]
    density_score_floor: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    annotations: PathBuf,

    #[arg(long)]
    detections: PathBuf,

    /// IoU criterion for a true positive.
    #[arg(long, default_value_t = DEFAULT_MATCH_IOU)]
    iou: f64,

    /// Include per-density-bin miss rates in the report.
    #[arg(long)]
    bins: bool,

    /// Also write the FPPI/miss-rate curve as CSV.
    #[arg(long)]
    curve_csv: Option<PathBuf>,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    annotations: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of images to generate.
    #[arg(long, default_value_t = 100)]
    images: usize,

    /// Crowdedness preset supplying the scene defaults.
    #[arg(long, value_enum, default_value_t = PresetArg::Citypersons)]
    preset: PresetArg,

    /// Output path for the annotation file.
    #[arg(long)]
    annotations: PathBuf,

    /// Output path for the detection file.
    #[arg(long)]
    detections: PathBuf,

    // scene overrides
    #[arg(long)]
    persons_per_image: Option<f64>,
    #[arg(long)]
    crowd_pair_rate: Option<f64>,
    #[arg(long)]
    image_width: Option<f64>,
    #[arg(long)]
    image_height: Option<f64>,
    #[arg(long)]
    min_person_height: Option<f64>,
    #[arg(long)]
    max_person_height: Option<f64>,
    #[arg(long)]
    aspect_ratio: Option<f64>,

    // detector model
    /// Std of proposal center/size jitter relative to box size.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Proposals per object.
    #[arg(long, default_value_t = 3)]
    duplicates: usize,
    /// Base proposal score before the localization penalty.
    #[arg(long, default_value_t = 0.95)]
    score_base: f64,
    /// Score penalty per unit of (1 - IoU with the source object).
    #[arg(long, default_value_t = 1.0)]
    score_slope: f64,
    /// Half-width of the uniform score noise.
    #[arg(long, default_value_t = 0.02)]
    score_noise: f64,
    /// Poisson mean of background false positives per image.
    #[arg(long, default_value_t = 1.0)]
    fp_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    Citypersons,
    Crowdhuman,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    annotations: PathBuf,

    /// Raw (pre-suppression) detection file.
    #[arg(long)]
    detections: PathBuf,

    /// Comma-separated method cells.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "greedy,soft-linear,adaptive")]
    methods: Vec<MethodArg>,

    /// Comma-separated base thresholds.
    #[arg(long, value_delimiter = ',', default_value = "0.5", value_name = "NT")]
    nt: Vec<f64>,

    #[arg(long, default_value_t = SuppressionConfig::DEFAULT_SIGMA)]
    sigma: f64,

    #[arg(long, default_value_t = SuppressionConfig::DEFAULT_SCORE_FLOOR)]
    score_floor: f64,

    /// IoU criterion for a true positive.
    #[arg(long, default_value_t = DEFAULT_MATCH_IOU)]
    iou: f64,

    /// Density source for adaptive cells.
    #[arg(long, value_enum, default_value_t = DensitySourceArg::Oracle)]
    density_source: DensitySourceArg,

    /// Co-detection score floor for the self-estimate source.
    #[arg(long, default_value_t = DEFAULT_SELF_ESTIMATE_SCORE_FLOOR)]
    density_score_floor: f64,
}

enum AppError {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for AppError {
    fn from(err: E) -> Self {
        AppError::Data(err.into())
    }
}

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Data(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    if cli.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    match cli.command {
        Command::Suppress(ref args) => cmd_suppress(&cli, args),
        Command::Eval(ref args) => cmd_eval(&cli, args),
        Command::Density(ref args) => cmd_density(&cli, args),
        Command::Simulate(ref args) => cmd_simulate(&cli, args),
        Command::Sweep(ref args) => cmd_sweep(&cli, args),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, AppError> {
    match path {
        Some(p) => {
            let file = File::create(p)
                .with_context(|| format!("creating output file {}", p.display()))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(std::io::stdout()))),
    }
}

fn report_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn load_annotations(path: &Path) -> Result<AnnotationSet, AppError> {
    let Loaded { value, warnings } = formats::read_annotations(path)?;
    report_warnings(&warnings);
    Ok(value)
}

fn load_detections(path: &Path) -> Result<DetectionSet, AppError> {
    let Loaded { value, warnings } = formats::read_detections(path)?;
    report_warnings(&warnings);
    Ok(value)
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn cmd_suppress(cli: &Cli, args: &SuppressArgs) -> Result<(), AppError> {
    let spec = args.method.spec();
    if matches!(args.density_source, Some(DensitySourceArg::Oracle)) && args.annotations.is_none()
    {
        return Err(usage(
            "--density-source oracle requires --annotations",
        ));
    }

    let detections = load_detections(&args.detections)?;
    let annotations = match &args.annotations {
        Some(path) => Some(load_annotations(path)?),
        None => None,
    };

    let source_arg = match (args.density_source, spec.adaptive) {
        (Some(src), _) => Some(src),
        (None, true) => Some(DensitySourceArg::Provided),
        (None, false) => None,
    };
    let source = source_arg.map(|s| s.source(args.density_score_floor));

    let config = SuppressionConfig {
        method: spec.method,
        adaptive: spec.adaptive,
        nt: args.nt,
        sigma: args.sigma,
        score_floor: args.score_floor,
    };

    let (kept, stats) = suppress_set(
        &detections,
        annotations.as_ref(),
        source.as_ref(),
        &config,
        cli.jobs,
    )
    .map_err(|e| match (&source, &args.density_source) {
        (Some(DensitySource::Provided), None) => AppError::Data(anyhow::Error::new(e).context(
            "adaptive suppression needs densities: either provide them in the \
             detection file or pass --density-source oracle|self-estimate",
        )),
        _ => AppError::Data(e.into()),
    })?;

    let mut out = open_output(cli.output.as_deref())?;
    formats::write_detections_to(&mut out, &kept).context("writing detections")?;
    out.flush().context("flushing output")?;

    eprintln!(
        "suppress: method={} nt={} images={} kept={} suppressed={}",
        spec.label(),
        args.nt,
        kept.len(),
        stats.kept,
        stats.suppressed
    );
    Ok(())
}

fn cmd_eval(cli: &Cli, args: &EvalArgs) -> Result<(), AppError> {
    if !(args.iou > 0.0 && args.iou < 1.0) {
        return Err(usage(format!("--iou {} outside (0, 1)", args.iou)));
    }
    let annotations = load_annotations(&args.annotations)?;
    let detections = load_detections(&args.detections)?;

    let (report, records) =
        evaluate_set(&annotations, &detections, args.iou, args.bins, cli.jobs)?;

    // --jobs only changes scheduling, never results, so it stays out of
    // the embedded config to keep reports byte-identical across runs
    let config = json!({
        "command": "eval",
        "annotations": path_str(&args.annotations),
        "detections": path_str(&args.detections),
        "iou": args.iou,
        "bins": args.bins,
    });
    let num_gt = records.iter().map(|r| r.num_gt()).sum();
    let file = Report {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        config,
        num_images: records.len(),
        num_gt,
        mr2: report.mr2,
        ap: report.ap,
        recall: report.recall,
        curve: report
            .curve
            .iter()
            .map(|p| CurveRecord {
                fppi: p.fppi,
                miss_rate: p.miss_rate,
            })
            .collect(),
        bin_mr2: report.bin_mr2.map(|bins| bins.to_vec()),
    };

    let mut out = open_output(cli.output.as_deref())?;
    formats::write_report_to(&mut out, &file).context("writing report")?;
    out.flush().context("flushing output")?;

    if let Some(csv_path) = &args.curve_csv {
        let mut csv = open_output(Some(csv_path))?;
        formats::write_curve_csv_to(&mut csv, &report.curve).context("writing curve CSV")?;
        csv.flush().context("flushing curve CSV")?;
    }

    eprintln!(
        "eval: images={} gt={} mr2={:.6} ap={:.6} recall={:.6}",
        records.len(),
        num_gt,
        report.mr2,
        report.ap,
        report.recall
    );
    Ok(())
}

fn cmd_density(cli: &Cli, args: &DensityArgs) -> Result<(), AppError> {
    let annotations = load_annotations(&args.annotations)?;
    let annotated = annotate_set_densities(&annotations);
    let mut out = open_output(cli.output.as_deref())?;
    formats::write_annotations_to(&mut out, &annotated).context("writing annotations")?;
    out.flush().context("flushing output")?;
    let objects: usize = annotated.values().map(|a| a.objects.len()).sum();
    eprintln!("density: images={} objects={}", annotated.len(), objects);
    Ok(())
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), AppError> {
    if cli.output.is_some() {
        return Err(usage(
            "simulate writes two files; use --annotations and --detections instead of --output",
        ));
    }

    let scene_seed = derive_seed(cli.seed, SCENE_STREAM);
    let detector_seed = derive_seed(cli.seed, DETECTOR_STREAM);

    let mut scene = match args.preset {
        PresetArg::Citypersons => SceneParams::citypersons(scene_seed),
        PresetArg::Crowdhuman => SceneParams::crowdhuman(scene_seed),
    };
    if let Some(v) = args.persons_per_image {
        scene.persons_per_image = v;
    }
    if let Some(v) = args.crowd_pair_rate {
        scene.crowd_pair_rate = v;
    }
    if let Some(v) = args.image_width {
        scene.image_width = v;
    }
    if let Some(v) = args.image_height {
        scene.image_height = v;
    }
    if let Some(v) = args.min_person_height {
        scene.person_height_range.0 = v;
    }
    if let Some(v) = args.max_person_height {
        scene.person_height_range.1 = v;
    }
    if let Some(v) = args.aspect_ratio {
        scene.aspect_ratio = v;
    }

    let detector = DetectorParams {
        localization_noise: args.noise,
        duplicate_count: args.duplicates,
        score_base: args.score_base,
        score_slope: args.score_slope,
        score_noise: args.score_noise,
        fp_rate: args.fp_rate,
        seed: detector_seed,
    };

    let (annotations, detections) = generate_dataset(args.images, &scene, &detector)?;
    formats::write_annotations(&args.annotations, &annotations)?;
    formats::write_detections(&args.detections, &detections)?;

    let persons: usize = annotations.values().map(|a| a.objects.len()).sum();
    let proposals: usize = detections.values().map(Vec::len).sum();
    eprintln!(
        "simulate: seed={} images={} persons={} proposals={} -> {}, {}",
        cli.seed,
        args.images,
        persons,
        proposals,
        args.annotations.display(),
        args.detections.display()
    );
    Ok(())
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<(), AppError> {
    if args.methods.is_empty() || args.nt.is_empty() {
        return Err(usage("sweep needs at least one method and one threshold"));
    }
    if !(args.iou > 0.0 && args.iou < 1.0) {
        return Err(usage(format!("--iou {} outside (0, 1)", args.iou)));
    }
    let annotations = load_annotations(&args.annotations)?;
    let detections = load_detections(&args.detections)?;

    let methods: Vec<MethodSpec> = args.methods.iter().map(|m| m.spec()).collect();
    let options = SweepOptions {
        sigma: args.sigma,
        score_floor: args.score_floor,
        iou_thresh: args.iou,
        density_source: args.density_source.source(args.density_score_floor),
        jobs: cli.jobs,
    };
    let rows = run_sweep(&annotations, &detections, &methods, &args.nt, &options)?;

    let mut out = open_output(cli.output.as_deref())?;
    write_sweep_csv(&mut out, &rows).context("writing sweep CSV")?;
    out.flush().context("flushing output")?;

    eprintln!(
        "sweep: cells={} density-source={} (methods={} thresholds={})",
        rows.len(),
        args.density_source.label(),
        methods.len(),
        args.nt.len()
    );
    Ok(())
}
