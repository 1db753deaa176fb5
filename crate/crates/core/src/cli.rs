//! Command-line front end. [`dispatch`] parses arguments, runs one
//! subcommand and maps the outcome to an exit code: 0 on success, 1 on usage
//! errors, 2 on data or format errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{
    embed_residual, extract_residual, load_bundle, oracle_extract, save_bundle, NoiseSpec, Provenance, ResidualMode,
    WatermarkBundle, DEFAULT_ALPHA,
};
use crate::error::{Error, Result};
use crate::harness::{run_experiment, write_report, ExperimentConfig, DEFAULT_SEED};
use crate::image::Image;
use crate::io::{read_image, write_png, write_ttwm};
use crate::metrics::{evaluate, Metric};
use crate::patterns::{make_references, PatternConfig};
use crate::reasoner::{reason_chain, ClassResult, ReasonConfig};
use crate::transforms::{apply_chain, ChainFile, ChainSpec, ClassMember};

const CHAIN_SCHEMA: &str = r#"CHAIN FILE (JSON, every section optional, angles in radians unless --degrees):
  {"semantic":    {"mask": "mask.png" | {"shape": "rect"|"ellipse", "seed": 1, "frac": 0.15},
                   "fill": "fill.png" | "surrogate"},
   "photometric": {"order": ["b","c","h","s"],
                   "params": {"b": 1.0, "c": 1.0, "h": 0.0, "s": 1.0}},
   "geometric":   {"order": ["ro","tr","sc","sh"],
                   "params": {"ro": 0.0, "tr_x": 0.0, "tr_y": 0.0, "sc": 1.0, "sh_x": 0.0, "sh_y": 0.0}}}
  Relative paths resolve against the chain file's directory. Translations are
  fractions of the image size, hue is a fraction of a full turn."#;

const MANIFEST_SCHEMA: &str = r#"BUNDLE MANIFEST (manifest.json next to three TTWM files):
  {"sem": "sem.ttwm", "pho": "pho.ttwm", "geo": "geo.ttwm", "height": 128, "width": 128,
   "source": "reference" | "ground_truth" | "extracted"}
  TTWM: b"TTWM", version byte 0x01, u32 LE height, width, channels, then
  height*width*channels f32 LE samples, channel-last."#;

const REASON_SCHEMA: &str = r#"REASON CONFIG (JSON, every field optional):
  {"max_iter": 100, "step": 0.1, "fd_step": 0.001, "restarts": 1,
   "search": "sparse" | "exhaustive", "levels": 3, "coarse_blur": 1.0,
   "min_gain": 0.001, "rel_gain": 0.05, "seed": 2115074590,
   "ranges": {"ro": [-0.5236, 0.5236], "tr": [-0.2, 0.2], "sc": [0.8, 1.2], "sh": [-0.2618, 0.2618],
              "b": [0.75, 1.25], "c": [0.75, 1.25], "h": [-0.35, 0.35], "s": [0.75, 1.25]}}

HYPOTHESIS (written by reason --out):
  {"geometric":   {"order": [...], "params": {...}, "loss": 0.0, "trace": [...]},
   "photometric": {"order": [...], "params": {...}, "loss": 0.0, "trace": [...]},
   "semantic":    {"mask": "<out stem>_mask.png", "coverage": 0.1},
   "losses":      {"geometric": 0.0, "photometric": 0.0}}
  Losses are mean absolute differences between the re-rendered and observed
  watermarks. A hypothesis is itself a valid chain file."#;

const EXPERIMENT_SCHEMA: &str = r#"EXPERIMENT CONFIG (JSON, every field optional):
  {"family": "Syn&B&Ro", "trials": 30, "sigma": 0.0, "channel": "oracle" | "residual",
   "alpha": 0.04, "images": "carrier/png/dir" | null, "size": 128, "seed": 2115074590,
   "ranges": {...}, "reason": {...}}
  Families combine Syn, B, C, H, S, Ro, Tr, Sc and Sh with '&'.
  Outputs report.csv (one row per trial) and aggregate.json."#;

#[derive(Parser, Debug)]
#[command(
    name = "telltale",
    version,
    about = "Tell-tale watermark toolkit: synthesise, transform, extract, reason, evaluate",
    after_long_help = "Every command is deterministic given its inputs and --seed.\nRun `telltale <command> --help` for the JSON schemas each command reads."
)]
struct Cli {
    /// Master seed; accepts decimal or 0x-prefixed hex.
    #[arg(long, global = true, value_parser = parse_seed)]
    seed: Option<u64>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render the three reference watermarks as TTWM files, PNG previews and a manifest.
    #[command(after_long_help = MANIFEST_SCHEMA)]
    CreateWatermarks(CreateArgs),
    /// Apply a transformation chain to an image.
    #[command(after_long_help = CHAIN_SCHEMA)]
    Transform(TransformArgs),
    /// Produce a watermark bundle through the oracle or residual channel, or from files.
    #[command(after_long_help = concat!(
        "oracle:   --refs --chain [--sigma]; ground truth plus clamped Gaussian noise\n",
        "residual: --in [--clean] [--alpha]; decodes a watermarked image, blind unless --clean is given\n",
        "          --carrier --refs [--chain] [--alpha]; embeds, applies the chain, then decodes blind\n",
        "file:     --sem --pho --geo; packs existing images into a bundle"
    ))]
    Extract(ExtractArgs),
    /// Recover the chain that explains an extracted bundle.
    #[command(after_long_help = REASON_SCHEMA)]
    Reason(ReasonArgs),
    /// Compare two images and print the metrics as JSON.
    Evaluate(EvaluateArgs),
    /// Run a batch traceability experiment.
    #[command(after_long_help = EXPERIMENT_SCHEMA)]
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct CreateArgs {
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    /// Hue rotation of the colour wheel, radians.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta_phi: f64,
    #[arg(long, default_value_t = 2.0)]
    xi_min: f64,
    #[arg(long, default_value_t = 10.0)]
    xi_max: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct TransformArgs {
    /// Input image, PNG or TTWM.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    chain: PathBuf,
    /// Output image; PNG when the extension is .png, TTWM otherwise.
    #[arg(long)]
    out: PathBuf,
    /// Read rotation and shear angles as degrees.
    #[arg(long)]
    degrees: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExtractMode {
    Oracle,
    Residual,
    File,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long, value_enum)]
    mode: ExtractMode,
    #[arg(long)]
    out_dir: PathBuf,
    /// Reference bundle: manifest path or directory.
    #[arg(long)]
    refs: Option<PathBuf>,
    #[arg(long)]
    chain: Option<PathBuf>,
    #[arg(long)]
    degrees: bool,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Watermarked (and possibly transformed) image to decode.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Clean carrier for informed decoding of --in.
    #[arg(long)]
    clean: Option<PathBuf>,
    /// Clean carrier to embed into before applying --chain.
    #[arg(long)]
    carrier: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    sem: Option<PathBuf>,
    #[arg(long)]
    pho: Option<PathBuf>,
    #[arg(long)]
    geo: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReasonArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Binarisation threshold for the semantic mask.
    #[arg(long, default_value_t = 0.5)]
    threshold: f32,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Comma-separated subset of l1, linf, mae, psnr, ssim, iou.
    #[arg(long, default_value = "l1,linf,psnr,ssim")]
    metrics: String,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the configured family.
    #[arg(long)]
    family: Option<String>,
    /// Overrides the configured trial count.
    #[arg(long)]
    trials: Option<usize>,
}

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let clean = s.replace('_', "");
    let parsed = match clean.strip_prefix("0x").or_else(|| clean.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => clean.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {s:?}: {e}"))
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match run(cli.command, seed, cli.seed.is_some()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                2
            } else {
                1
            }
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
}

fn run(command: Command, seed: u64, seed_given: bool) -> Result<()> {
    match command {
        Command::CreateWatermarks(a) => create_watermarks(a),
        Command::Transform(a) => transform(a, seed),
        Command::Extract(a) => extract(a, seed),
        Command::Reason(a) => reason(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Experiment(a) => experiment(a, seed_given.then_some(seed)),
    }
}

/// PNG when the extension says so, TTWM otherwise.
fn write_image(img: &Image, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("png") => write_png(img, path),
        _ => write_ttwm(img, path),
    }
}

fn create_watermarks(a: CreateArgs) -> Result<()> {
    let cfg = PatternConfig {
        height: a.height,
        width: a.width,
        delta_phi: a.delta_phi,
        xi_min: a.xi_min,
        xi_max: a.xi_max,
    };
    let refs = make_references(&cfg)?;
    let manifest = save_bundle(&refs, &a.out_dir)?;
    for (name, img) in [("sem", &refs.sem), ("pho", &refs.pho), ("geo", &refs.geo)] {
        write_png(img, a.out_dir.join(format!("{name}.png")))?;
    }
    println!("{}", manifest.display());
    Ok(())
}

fn load_chain(path: &Path, degrees: bool, height: usize, width: usize, seed: u64) -> Result<ChainSpec> {
    let mut file = ChainFile::load(path)?;
    if degrees {
        file.degrees_to_radians();
    }
    let base = path.parent().unwrap_or(Path::new("."));
    file.resolve(height, width, base, seed)
}

fn transform(a: TransformArgs, seed: u64) -> Result<()> {
    let img = read_image(&a.input)?;
    let chain = load_chain(&a.chain, a.degrees, img.height(), img.width(), seed)?;
    write_image(&apply_chain(&img, &chain)?, &a.out)
}

fn need<'a, T>(v: &'a Option<T>, flag: &str, mode: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::Param(format!("--mode {mode} needs {flag}")))
}

fn extract(a: ExtractArgs, seed: u64) -> Result<()> {
    // separate streams for chain materialisation and channel noise
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chain_seed, noise_seed): (u64, u64) = (rng.gen(), rng.gen());
    let bundle = match a.mode {
        ExtractMode::Oracle => {
            let refs = load_bundle(need(&a.refs, "--refs", "oracle")?)?;
            let chain = match &a.chain {
                Some(p) => load_chain(p, a.degrees, refs.height(), refs.width(), chain_seed)?,
                None => ChainSpec::identity(),
            };
            oracle_extract(&refs, &chain, NoiseSpec::new(a.sigma, noise_seed)?)?
        }
        ExtractMode::Residual => match (&a.input, &a.carrier) {
            (Some(input), None) => {
                let x = read_image(input)?;
                let clean = a.clean.as_ref().map(read_image).transpose()?;
                let mode = match &clean {
                    Some(c) => ResidualMode::Informed(c),
                    None => ResidualMode::Blind,
                };
                extract_residual(&x, mode, a.alpha)?
            }
            (None, Some(carrier)) => {
                let refs = load_bundle(need(&a.refs, "--refs", "residual")?)?;
                let x = read_image(carrier)?;
                let chain = match &a.chain {
                    Some(p) => load_chain(p, a.degrees, x.height(), x.width(), chain_seed)?,
                    None => ChainSpec::identity(),
                };
                let marked = apply_chain(&embed_residual(&x, &refs, a.alpha)?, &chain)?;
                extract_residual(&marked, ResidualMode::Blind, a.alpha)?
            }
            _ => {
                return Err(Error::Param(
                    "--mode residual needs exactly one of --in and --carrier".into(),
                ))
            }
        },
        ExtractMode::File => WatermarkBundle::new(
            read_image(need(&a.sem, "--sem", "file")?)?,
            read_image(need(&a.pho, "--pho", "file")?)?,
            read_image(need(&a.geo, "--geo", "file")?)?,
            Provenance::Extracted,
        )
        .map_err(|e| Error::Format(e.to_string()))?,
    };
    let manifest = save_bundle(&bundle, &a.out_dir)?;
    println!("{}", manifest.display());
    Ok(())
}

fn class_json<O: ClassMember, P: Serialize>(r: &ClassResult<O, P>) -> serde_json::Value {
    serde_json::json!({
        "order": r.order.names(),
        "params": r.params,
        "loss": r.loss,
        "trace": r.trace,
    })
}

fn reason(a: ReasonArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let cfg: ReasonConfig = serde_json::from_str(&text)?;
            cfg.validate()?;
            cfg
        }
        None => ReasonConfig::default(),
    };
    let bundle = load_bundle(&a.bundle)?;
    let refs = load_bundle(&a.refs)?;
    let hyp = reason_chain(&bundle, &refs, &cfg)?;
    let mask = hyp.semantic_mask.binarized(a.threshold);
    let stem = a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("hypothesis");
    let mask_name = format!("{stem}_mask.png");
    let mask_path = a.out.with_file_name(&mask_name);
    write_image(&mask, &mask_path)?;
    let out = serde_json::json!({
        "geometric": class_json(&hyp.geometric),
        "photometric": class_json(&hyp.photometric),
        "semantic": {"mask": mask_name, "coverage": mask.mean()},
        "losses": {"geometric": hyp.geometric.loss, "photometric": hyp.photometric.loss},
    });
    let path = &a.out;
    std::fs::write(path, serde_json::to_string_pretty(&out)?).map_err(|e| Error::io(path, e))?;
    println!("{}", path.display());
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let which = a
        .metrics
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Metric>>>()?;
    if which.is_empty() {
        return Err(Error::Param("--metrics is empty".into()));
    }
    let report = evaluate(&read_image(&a.a)?, &read_image(&a.b)?, &which)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn experiment(a: ExperimentArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(f) = &a.family {
        cfg.family = f.parse()?;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    log::info!("experiment {} x{} sigma {}", cfg.family, cfg.trials, cfg.sigma);
    let report = run_experiment(&cfg)?;
    let (csv, json) = write_report(&report, &a.out_dir)?;
    println!("{}\n{}", csv.display(), json.display());
    Ok(())
}
