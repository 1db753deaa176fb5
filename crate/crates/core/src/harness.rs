//! Batch traceability experiments: sample chains from a family, extract
//! watermarks through a channel, reason, and tabulate per-parameter errors.
//!
//! Errors are absolute differences in each parameter's reporting unit:
//! fractions of a full cycle for rotation, shear and hue, fractions of the
//! image size for translation, and plain factors for scale, brightness,
//! contrast and saturation. Translation and shear errors average the two axes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    embed_residual, extract_residual, oracle_extract, synthetic_carrier, NoiseSpec, ResidualMode, WatermarkBundle,
    DEFAULT_ALPHA,
};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::read_png_rgb_resized;
use crate::metrics::iou;
use crate::patterns::{make_references, PatternConfig};
use crate::reasoner::{reason_chain, ChainHypothesis, ReasonConfig};
use crate::transforms::{
    apply_chain, composed_matrix, random_mask, ChainSpec, ClassMember, Fill, GeoBlock, GeoOp, GeoOrder, GeoParams,
    ParamRanges, PhoBlock, PhoOp, PhoOrder, PhoParams, SemanticEdit,
};

pub const DEFAULT_SEED: u64 = 0x7E11_7A1E;

/// Which operations a chain family varies, written like `Syn&B&Ro`.
///
/// `Syn` adds a semantic edit; `B`, `C`, `H`, `S` pick photometric and `Ro`,
/// `Tr`, `Sc`, `Sh` geometric operations. Any combination parses; the twelve
/// standard families are listed in [`ChainFamily::STANDARD`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainFamily {
    pub semantic: bool,
    pub photometric: Vec<PhoOp>,
    pub geometric: Vec<GeoOp>,
}

impl ChainFamily {
    pub const STANDARD: [&'static str; 12] = [
        "Syn&B", "Syn&C", "Syn&H", "Syn&S", "Syn&Ro", "Syn&Tr", "Syn&Sc", "Syn&Sh", "Syn&B&Ro", "Syn&C&Tr", "Syn&H&Sc",
        "Syn&S&Sh",
    ];

    pub fn standard() -> Vec<ChainFamily> {
        Self::STANDARD
            .iter()
            .map(|s| s.parse().expect("valid family"))
            .collect()
    }

    pub fn is_active_pho(&self, op: PhoOp) -> bool {
        self.photometric.contains(&op)
    }

    pub fn is_active_geo(&self, op: GeoOp) -> bool {
        self.geometric.contains(&op)
    }

    /// Reporting keys of the active operations, photometric first.
    pub fn active_keys(&self) -> Vec<&'static str> {
        OP_KEYS
            .iter()
            .copied()
            .filter(|k| match *k {
                "ro" => self.is_active_geo(GeoOp::Ro),
                "tr" => self.is_active_geo(GeoOp::Tr),
                "sc" => self.is_active_geo(GeoOp::Sc),
                "sh" => self.is_active_geo(GeoOp::Sh),
                "b" => self.is_active_pho(PhoOp::B),
                "c" => self.is_active_pho(PhoOp::C),
                "h" => self.is_active_pho(PhoOp::H),
                _ => self.is_active_pho(PhoOp::S),
            })
            .collect()
    }
}

impl FromStr for ChainFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut fam = ChainFamily {
            semantic: false,
            photometric: Vec::new(),
            geometric: Vec::new(),
        };
        for tok in s.split('&').map(str::trim) {
            let dup = match tok.to_ascii_lowercase().as_str() {
                "syn" => std::mem::replace(&mut fam.semantic, true),
                "b" | "c" | "h" | "s" => {
                    let op = PhoOp::parse(&tok.to_ascii_lowercase()).expect("listed name");
                    let dup = fam.photometric.contains(&op);
                    fam.photometric.push(op);
                    dup
                }
                "ro" | "tr" | "sc" | "sh" => {
                    let op = GeoOp::parse(&tok.to_ascii_lowercase()).expect("listed name");
                    let dup = fam.geometric.contains(&op);
                    fam.geometric.push(op);
                    dup
                }
                _ => return Err(Error::Param(format!("unknown family token {tok:?} in {s:?}"))),
            };
            if dup {
                return Err(Error::Param(format!("family {s:?} repeats {tok:?}")));
            }
        }
        fam.photometric.sort_by_key(|&op| op as usize);
        fam.geometric.sort_by_key(|&op| op as usize);
        Ok(fam)
    }
}

impl fmt::Display for ChainFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<&str> = Vec::new();
        if self.semantic {
            parts.push("Syn");
        }
        let title = |name: &'static str| match name {
            "b" => "B",
            "c" => "C",
            "h" => "H",
            "s" => "S",
            "ro" => "Ro",
            "tr" => "Tr",
            "sc" => "Sc",
            _ => "Sh",
        };
        parts.extend(self.photometric.iter().map(|op| title(op.name())));
        parts.extend(self.geometric.iter().map(|op| title(op.name())));
        write!(f, "{}", parts.join("&"))
    }
}

impl Serialize for ChainFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ChainFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Uniformly samples the family's active parameters; everything else stays at
/// identity. Blocks with no active operation are left out. Orders are drawn
/// uniformly from the 24 permutations.
pub fn sample_chain(
    family: &ChainFamily,
    ranges: &ParamRanges,
    height: usize,
    width: usize,
    seed: u64,
) -> Result<ChainSpec> {
    ranges.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain = ChainSpec::identity();
    if family.semantic {
        let mask = random_mask(height, width, rng.gen())?;
        chain = chain.with_semantic(SemanticEdit::new(mask, Fill::Surrogate { seed: rng.gen() })?);
    }
    if !family.photometric.is_empty() {
        let order = *PhoOrder::all().choose(&mut rng).expect("24 orders");
        let mut v = PhoParams::identity().to_array();
        let boxes = ranges.pho_boxes();
        for &op in &family.photometric {
            let i = PhoParams::index(op);
            v[i] = boxes[i].sample(&mut rng);
        }
        chain = chain.with_photometric(order, PhoParams::from_slice(&v));
    }
    if !family.geometric.is_empty() {
        let order = *GeoOrder::all().choose(&mut rng).expect("24 orders");
        let mut v = GeoParams::identity().to_array();
        let boxes = ranges.geo_boxes();
        for &op in &family.geometric {
            for &i in GeoParams::indices(op) {
                v[i] = boxes[i].sample(&mut rng);
            }
        }
        chain = chain.with_geometric(order, GeoParams::from_slice(&v));
    }
    Ok(chain)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    /// Ground truth plus Gaussian noise of `sigma`.
    Oracle,
    /// Residual embedding into a carrier, chain applied to the marked carrier,
    /// blind extraction.
    Residual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: ChainFamily,
    pub trials: usize,
    pub sigma: f64,
    pub channel: ChannelMode,
    /// Residual embedding strength.
    pub alpha: f64,
    /// Carrier PNGs for the residual channel; synthetic carriers otherwise.
    pub images: Option<PathBuf>,
    pub size: usize,
    pub ranges: ParamRanges,
    pub reason: ReasonConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: "Syn&Ro".parse().expect("valid family"),
            trials: 30,
            sigma: 0.0,
            channel: ChannelMode::Oracle,
            alpha: DEFAULT_ALPHA,
            images: None,
            size: 128,
            ranges: ParamRanges::default(),
            reason: ReasonConfig::default(),
            seed: DEFAULT_SEED,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Param("trials must be at least 1".into()));
        }
        if self.size < 8 {
            return Err(Error::Param(format!("size must be at least 8, got {}", self.size)));
        }
        NoiseSpec::new(self.sigma, 0)?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Param(format!("alpha must be > 0, got {}", self.alpha)));
        }
        self.ranges.validate()?;
        self.reason.validate()
    }
}

/// Reporting order of per-operation errors.
pub const OP_KEYS: [&str; 8] = ["ro", "tr", "sc", "sh", "b", "c", "h", "s"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub geo_order: GeoOrder,
    pub geo: GeoParams,
    pub pho_order: PhoOrder,
    pub pho: PhoParams,
    /// In [`OP_KEYS`] order.
    pub errors: [f64; 8],
    pub geo_loss: f64,
    pub pho_loss: f64,
    pub iou: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub geo_order: Option<GeoOrder>,
    pub geo: GeoParams,
    pub pho_order: Option<PhoOrder>,
    pub pho: PhoParams,
    pub outcome: std::result::Result<Estimate, String>,
    /// Not written to the CSV, which must be reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl ErrorStats {
    fn of(v: &[f64]) -> Self {
        let n = v.len();
        let mean = if n == 0 {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / n as f64
        };
        let std = if n < 2 {
            0.0
        } else {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std, n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub family: String,
    pub trials: usize,
    pub sigma: f64,
    pub channel: ChannelMode,
    pub seed: u64,
    /// Errors of the family's active operations over successful trials.
    pub errors: std::collections::BTreeMap<String, ErrorStats>,
    pub geo_loss: ErrorStats,
    pub pho_loss: ErrorStats,
    pub iou: ErrorStats,
    /// Share of successful trials whose re-rendered geometric and photometric
    /// watermarks are both within mean-L1 0.02 of the observed ones.
    pub explained: f64,
    pub failures: usize,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<TrialRow>,
    pub aggregate: Aggregate,
}

pub const EXPLAINED_L1: f64 = 0.02;

/// The RNG for trial `index`: one stream of the experiment seed per trial, so
/// results do not depend on scheduling.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// The true edited region in the output frame: the mask carried through the
/// composed geometric map with nearest-neighbour lookup.
pub fn transported_mask(mask: &Image, geo: Option<&GeoBlock>) -> Result<Image> {
    let Some(block) = geo else {
        return Ok(mask.clone());
    };
    let (h, w) = (mask.height(), mask.width());
    let m = composed_matrix(&block.order, &block.params, w, h)?;
    Image::from_fn(h, w, 1, |x, y, px| {
        let (u, v) = m.apply(x as f64, y as f64);
        let (u, v) = (u.round(), v.round());
        if u >= 0.0 && v >= 0.0 && u < w as f64 && v < h as f64 {
            px[0] = mask.get(u as usize, v as usize, 0);
        }
    })
}

fn cycles(rad: f64) -> f64 {
    rad / std::f64::consts::TAU
}

fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Absolute errors in reporting units, [`OP_KEYS`] order.
pub fn param_errors(true_geo: &GeoParams, est_geo: &GeoParams, true_pho: &PhoParams, est_pho: &PhoParams) -> [f64; 8] {
    let (t, e) = (true_geo, est_geo);
    [
        cycles((e.ro - t.ro).abs()),
        ((e.tr_x - t.tr_x).abs() + (e.tr_y - t.tr_y).abs()) / 2.0,
        (e.sc - t.sc).abs(),
        cycles(((e.sh_x - t.sh_x).abs() + (e.sh_y - t.sh_y).abs()) / 2.0),
        (est_pho.b - true_pho.b).abs(),
        (est_pho.c - true_pho.c).abs(),
        hue_distance(est_pho.h, true_pho.h),
        (est_pho.s - true_pho.s).abs(),
    ]
}

struct Carriers {
    paths: Vec<PathBuf>,
}

impl Carriers {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let mut paths = Vec::new();
        if let Some(dir) = &cfg.images {
            let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
            for entry in entries {
                let p = entry.map_err(|e| Error::io(dir, e))?.path();
                if p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("png"))
                {
                    paths.push(p);
                }
            }
            paths.sort();
            if paths.is_empty() {
                return Err(Error::Format(format!("no PNG images in {}", dir.display())));
            }
        }
        Ok(Self { paths })
    }

    fn get(&self, index: usize, size: usize, seed: u64) -> Result<Image> {
        if self.paths.is_empty() {
            synthetic_carrier(size, size, seed)
        } else {
            read_png_rgb_resized(&self.paths[index % self.paths.len()], size, size)
        }
    }
}

fn extract(
    cfg: &ExperimentConfig,
    refs: &WatermarkBundle,
    chain: &ChainSpec,
    carriers: &Carriers,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<WatermarkBundle> {
    match cfg.channel {
        ChannelMode::Oracle => oracle_extract(refs, chain, NoiseSpec::new(cfg.sigma, rng.gen())?),
        ChannelMode::Residual => {
            let x = carriers.get(index, cfg.size, rng.gen())?;
            let marked = embed_residual(&x, refs, cfg.alpha)?;
            extract_residual(&apply_chain(&marked, chain)?, ResidualMode::Blind, cfg.alpha)
        }
    }
}

fn score(chain: &ChainSpec, hyp: &ChainHypothesis) -> Result<Estimate> {
    let (tg, tp) = truth(chain);
    let truth_mask = match &chain.semantic {
        Some(edit) => transported_mask(edit.mask(), chain.geometric.as_ref())?,
        None => Image::zeros(hyp.binarized_mask.height(), hyp.binarized_mask.width(), 1)?,
    };
    Ok(Estimate {
        geo_order: hyp.geometric.order,
        geo: hyp.geometric.params,
        pho_order: hyp.photometric.order,
        pho: hyp.photometric.params,
        errors: param_errors(&tg, &hyp.geometric.params, &tp, &hyp.photometric.params),
        geo_loss: hyp.geometric.loss,
        pho_loss: hyp.photometric.loss,
        iou: iou(&hyp.binarized_mask, &truth_mask)?,
    })
}

fn truth(chain: &ChainSpec) -> (GeoParams, PhoParams) {
    (
        chain.geometric.map_or(GeoParams::identity(), |b| b.params),
        chain.photometric.map_or(PhoParams::identity(), |b| b.params),
    )
}

fn run_trial(cfg: &ExperimentConfig, refs: &WatermarkBundle, carriers: &Carriers, index: usize) -> TrialRow {
    let start = Instant::now();
    let mut rng = trial_rng(cfg.seed, index);
    let seed: u64 = rng.gen();
    let chain = sample_chain(&cfg.family, &cfg.ranges, cfg.size, cfg.size, seed);
    let (geo, pho) = chain
        .as_ref()
        .map(truth)
        .unwrap_or((GeoParams::identity(), PhoParams::identity()));
    let outcome = chain.and_then(|chain| {
        let bundle = extract(cfg, refs, &chain, carriers, index, &mut rng)?;
        let hyp = reason_chain(&bundle, refs, &cfg.reason)?;
        score(&chain, &hyp)
    });
    let chain = sample_chain(&cfg.family, &cfg.ranges, cfg.size, cfg.size, seed).ok();
    TrialRow {
        trial: index,
        seed,
        geo_order: chain.as_ref().and_then(|c| c.geometric.map(|b: GeoBlock| b.order)),
        geo,
        pho_order: chain.as_ref().and_then(|c| c.photometric.map(|b: PhoBlock| b.order)),
        pho,
        outcome: outcome.map_err(|e| e.to_string()),
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn aggregate(cfg: &ExperimentConfig, rows: &[TrialRow]) -> Aggregate {
    let ok: Vec<&Estimate> = rows.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let active = cfg.family.active_keys();
    let errors = OP_KEYS
        .iter()
        .enumerate()
        .filter(|(_, k)| active.contains(k))
        .map(|(i, k)| {
            (
                k.to_string(),
                ErrorStats::of(&ok.iter().map(|e| e.errors[i]).collect::<Vec<_>>()),
            )
        })
        .collect();
    let explained = ok
        .iter()
        .filter(|e| e.geo_loss <= EXPLAINED_L1 && e.pho_loss <= EXPLAINED_L1)
        .count() as f64
        / ok.len().max(1) as f64;
    Aggregate {
        family: cfg.family.to_string(),
        trials: rows.len(),
        sigma: cfg.sigma,
        channel: cfg.channel,
        seed: cfg.seed,
        errors,
        geo_loss: ErrorStats::of(&ok.iter().map(|e| e.geo_loss).collect::<Vec<_>>()),
        pho_loss: ErrorStats::of(&ok.iter().map(|e| e.pho_loss).collect::<Vec<_>>()),
        iou: ErrorStats::of(&ok.iter().map(|e| e.iou).collect::<Vec<_>>()),
        explained,
        failures: rows.len() - ok.len(),
        wall_seconds: rows.iter().map(|r| r.seconds).sum(),
    }
}

/// Runs every trial. Channel and reasoning failures are recorded in the row.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let refs = make_references(&PatternConfig::with_size(cfg.size, cfg.size))?;
    let carriers = Carriers::new(cfg)?;
    let rows: Vec<TrialRow> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, &refs, &carriers, i))
        .collect();
    let aggregate = aggregate(cfg, &rows);
    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
        aggregate,
    })
}

pub const CSV_COLUMNS: [&str; 41] = [
    "trial",
    "seed",
    "family",
    "status",
    "geo_order",
    "geo_order_est",
    "pho_order",
    "pho_order_est",
    "ro",
    "ro_est",
    "tr_x",
    "tr_x_est",
    "tr_y",
    "tr_y_est",
    "sc",
    "sc_est",
    "sh_x",
    "sh_x_est",
    "sh_y",
    "sh_y_est",
    "b",
    "b_est",
    "c",
    "c_est",
    "h",
    "h_est",
    "s",
    "s_est",
    "err_ro",
    "err_tr",
    "err_sc",
    "err_sh",
    "err_b",
    "err_c",
    "err_h",
    "err_s",
    "geo_loss",
    "pho_loss",
    "iou",
    "explained",
    "error",
];

fn num(v: f64) -> String {
    format!("{v:.9}")
}

fn csv_record(family: &str, row: &TrialRow) -> Vec<String> {
    let order = |o: Option<String>| o.unwrap_or_else(|| "-".into());
    let mut rec = vec![
        row.trial.to_string(),
        row.seed.to_string(),
        family.to_string(),
        if row.outcome.is_ok() { "ok" } else { "error" }.into(),
        order(row.geo_order.map(|o| o.to_string())),
        order(row.outcome.as_ref().ok().map(|e| e.geo_order.to_string())),
        order(row.pho_order.map(|o| o.to_string())),
        order(row.outcome.as_ref().ok().map(|e| e.pho_order.to_string())),
    ];
    let est = row.outcome.as_ref().ok();
    let truth = row.geo.to_array().into_iter().chain(row.pho.to_array());
    let guess: Vec<Option<f64>> = match est {
        Some(e) => e.geo.to_array().into_iter().chain(e.pho.to_array()).map(Some).collect(),
        None => vec![None; 10],
    };
    for (t, g) in truth.zip(guess) {
        rec.push(num(t));
        rec.push(g.map(num).unwrap_or_default());
    }
    match est {
        Some(e) => {
            rec.extend(e.errors.iter().map(|&v| num(v)));
            rec.extend([num(e.geo_loss), num(e.pho_loss), num(e.iou)]);
            rec.push((e.geo_loss <= EXPLAINED_L1 && e.pho_loss <= EXPLAINED_L1).to_string());
            rec.push(String::new());
        }
        None => {
            rec.extend(std::iter::repeat_n(String::new(), 12));
            rec.push(row.outcome.as_ref().err().cloned().unwrap_or_default());
        }
    }
    rec
}

/// The CSV text of a report; byte-identical for identical configurations.
pub fn report_csv(report: &ExperimentReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    let family = report.config.family.to_string();
    for row in &report.rows {
        w.write_record(csv_record(&family, row))?;
    }
    w.into_inner().map_err(|e| Error::Format(format!("csv buffer: {e}")))
}

/// Writes `report.csv` and `aggregate.json` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("report.csv");
    std::fs::write(&csv_path, report_csv(report)?).map_err(|e| Error::io(&csv_path, e))?;
    let json_path = dir.join("aggregate.json");
    let text = serde_json::to_string_pretty(&report.aggregate)?;
    std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    Ok((csv_path, json_path))
}
