//! Extraction channels producing watermark bundles from transformed media.
//!
//! Reasoning only consumes a [`WatermarkBundle`]; where it came from is
//! abstracted here. Three sources are provided:
//!
//! * the oracle channel: ideal ground truth plus optional Gaussian noise,
//! * a linear residual embedding ([`embed_residual`] / [`extract_residual`]),
//! * bundles written to disk by an external codec ([`load_bundle`]).
//!
//! # Residual payload layout
//!
//! The payload plane `P` has the carrier's size and three channels. Each
//! watermark is box-downsampled 2× and written into quadrant slots of size
//! `⌊H/2⌋ × ⌊W/2⌋`:
//!
//! | slot | every channel `c`         |
//! |------|---------------------------|
//! | NW   | semantic watermark        |
//! | NE   | geometric watermark       |
//! | SW   | photometric channel `c`   |
//! | SE   | photometric channel `c`   |
//!
//! Replicated slots are averaged on extraction. An odd trailing row or column
//! carries no payload (value 0.5).

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::{read_ttwm, write_ttwm};
use crate::transforms::{ground_truth_watermarks, ChainSpec};

pub const DEFAULT_ALPHA: f64 = 0.04;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Reference,
    GroundTruth,
    Extracted,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Reference => "reference",
            Provenance::GroundTruth => "ground_truth",
            Provenance::Extracted => "extracted",
        }
    }
}

/// Semantic (1 channel), photometric (3 channels) and geometric (1 channel)
/// watermarks of a common size.
#[derive(Clone, Debug, PartialEq)]
pub struct WatermarkBundle {
    pub sem: Image,
    pub pho: Image,
    pub geo: Image,
    pub provenance: Provenance,
}

impl WatermarkBundle {
    pub fn new(sem: Image, pho: Image, geo: Image, provenance: Provenance) -> Result<Self> {
        sem.ensure_channels(1, "semantic watermark")?;
        pho.ensure_channels(3, "photometric watermark")?;
        geo.ensure_channels(1, "geometric watermark")?;
        if !sem.same_size(&pho) || !sem.same_size(&geo) {
            return Err(Error::Shape("bundle watermarks differ in size".into()));
        }
        Ok(Self {
            sem,
            pho,
            geo,
            provenance,
        })
    }

    pub fn height(&self) -> usize {
        self.sem.height()
    }

    pub fn width(&self) -> usize {
        self.sem.width()
    }

    fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { sigma: 0.0, seed: 0 };

    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Param(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }
}

/// A smooth random colour image standing in for a natural carrier: a few
/// seeded low-frequency sinusoids per channel, kept inside `[0.15, 0.85]`.
pub fn synthetic_carrier(height: usize, width: usize, seed: u64) -> Result<Image> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<[f32; 4]> = (0..9)
        .map(|_| {
            [
                rng.gen_range(0.01..0.15),
                rng.gen_range(0.01..0.15),
                rng.gen_range(0.0..std::f32::consts::TAU),
                rng.gen_range(0.05..0.12),
            ]
        })
        .collect();
    let base: Vec<f32> = (0..3).map(|_| rng.gen_range(0.35..0.65)).collect();
    Image::from_fn(height, width, 3, |x, y, px| {
        for (c, v) in px.iter_mut().enumerate() {
            let s: f32 = waves[c * 3..c * 3 + 3]
                .iter()
                .map(|[fx, fy, ph, a]| a * (x as f32 * fx + y as f32 * fy + ph).sin())
                .sum();
            *v = (base[c] + s).clamp(0.15, 0.85);
        }
    })
}

/// Ideal extraction: the ground-truth watermarks plus clamped Gaussian noise.
pub fn oracle_extract(refs: &WatermarkBundle, chain: &ChainSpec, noise: NoiseSpec) -> Result<WatermarkBundle> {
    NoiseSpec::new(noise.sigma, noise.seed)?;
    let gt = ground_truth_watermarks(refs, chain)?;
    if noise.sigma == 0.0 {
        return Ok(gt.with_provenance(Provenance::Extracted));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let normal = Normal::new(0.0, noise.sigma).expect("validated sigma");
    let mut perturb = |img: Image| {
        let mut out = img;
        for v in out.data_mut() {
            *v = (*v as f64 + normal.sample(&mut rng)).clamp(0.0, 1.0) as f32;
        }
        out
    };
    let sem = perturb(gt.sem);
    let pho = perturb(gt.pho);
    let geo = perturb(gt.geo);
    WatermarkBundle::new(sem, pho, geo, Provenance::Extracted)
}

fn downsample2(img: &Image) -> Vec<f32> {
    let (h, w, ch) = img.dims();
    let (hh, hw) = (h / 2, w / 2);
    let mut out = vec![0.0; hh * hw * ch];
    for y in 0..hh {
        for x in 0..hw {
            for c in 0..ch {
                let s = img.get(2 * x, 2 * y, c)
                    + img.get(2 * x + 1, 2 * y, c)
                    + img.get(2 * x, 2 * y + 1, c)
                    + img.get(2 * x + 1, 2 * y + 1, c);
                out[(y * hw + x) * ch + c] = s / 4.0;
            }
        }
    }
    out
}

/// The payload plane `P` for `refs` (see the module docs for the layout).
pub fn payload_plane(refs: &WatermarkBundle) -> Result<Image> {
    let (h, w) = (refs.height(), refs.width());
    if h < 2 || w < 2 {
        return Err(Error::Shape("payload needs at least 2x2 pixels".into()));
    }
    let (hh, hw) = (h / 2, w / 2);
    let sem = downsample2(&refs.sem);
    let geo = downsample2(&refs.geo);
    let pho = downsample2(&refs.pho);
    let mut p = Image::filled(h, w, 3, 0.5)?;
    for y in 0..hh {
        for x in 0..hw {
            let i = y * hw + x;
            for c in 0..3 {
                p.set(x, y, c, sem[i]);
                p.set(x + hw, y, c, geo[i]);
                p.set(x, y + hh, c, pho[i * 3 + c]);
                p.set(x + hw, y + hh, c, pho[i * 3 + c]);
            }
        }
    }
    Ok(p)
}

/// Reassembles full-resolution watermarks from a payload plane.
pub fn demosaic(payload: &Image) -> Result<WatermarkBundle> {
    payload.ensure_channels(3, "payload")?;
    let (h, w) = (payload.height(), payload.width());
    let (hh, hw) = (h / 2, w / 2);
    if hh == 0 || hw == 0 {
        return Err(Error::Shape("payload needs at least 2x2 pixels".into()));
    }
    let slot = |x: usize, y: usize| ((x / 2).min(hw - 1), (y / 2).min(hh - 1));
    let sem = Image::from_fn(h, w, 1, |x, y, px| {
        let (sx, sy) = slot(x, y);
        px[0] = (0..3).map(|c| payload.get(sx, sy, c)).sum::<f32>() / 3.0;
    })?;
    let geo = Image::from_fn(h, w, 1, |x, y, px| {
        let (sx, sy) = slot(x, y);
        px[0] = (0..3).map(|c| payload.get(sx + hw, sy, c)).sum::<f32>() / 3.0;
    })?;
    let pho = Image::from_fn(h, w, 3, |x, y, px| {
        let (sx, sy) = slot(x, y);
        for (c, v) in px.iter_mut().enumerate() {
            *v = (payload.get(sx, sy + hh, c) + payload.get(sx + hw, sy + hh, c)) / 2.0;
        }
    })?;
    WatermarkBundle::new(sem.clamped(), pho.clamped(), geo.clamped(), Provenance::Extracted)
}

/// `clamp(x + alpha·(P − 0.5))`.
pub fn embed_residual(x: &Image, refs: &WatermarkBundle, alpha: f64) -> Result<Image> {
    x.ensure_channels(3, "carrier")?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Param(format!("alpha must be >= 0, got {alpha}")));
    }
    if x.height() != refs.height() || x.width() != refs.width() {
        return Err(Error::Shape(format!(
            "carrier is {}x{}, watermarks are {}x{}",
            x.height(),
            x.width(),
            refs.height(),
            refs.width()
        )));
    }
    let p = payload_plane(refs)?;
    let data = x
        .data()
        .iter()
        .zip(p.data())
        .map(|(&v, &q)| (v as f64 + alpha * (q as f64 - 0.5)).clamp(0.0, 1.0) as f32)
        .collect();
    Image::new(x.height(), x.width(), 3, data)
}

#[derive(Clone, Debug)]
pub enum ResidualMode<'a> {
    /// Estimate the carrier by Gaussian blur (radius 3, σ 1.5).
    Blind,
    /// Subtract the known clean carrier.
    Informed(&'a Image),
}

/// 7×7 Gaussian blur (σ 1.5) with edge replication.
pub fn gaussian_blur(img: &Image) -> Image {
    const RADIUS: i64 = 3;
    const SIGMA: f64 = 1.5;
    let k: Vec<f32> = {
        let raw: Vec<f64> = (-RADIUS..=RADIUS)
            .map(|i| (-(i * i) as f64 / (2.0 * SIGMA * SIGMA)).exp())
            .collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| (v / s) as f32).collect()
    };
    let (h, w, ch) = img.dims();
    let pass = |src: &Image, horizontal: bool| {
        Image::from_fn(h, w, ch, |x, y, px| {
            for (c, v) in px.iter_mut().enumerate() {
                *v = (-RADIUS..=RADIUS)
                    .zip(&k)
                    .map(|(d, kv)| {
                        let (sx, sy) = if horizontal {
                            ((x as i64 + d).clamp(0, w as i64 - 1) as usize, y)
                        } else {
                            (x, (y as i64 + d).clamp(0, h as i64 - 1) as usize)
                        };
                        kv * src.get(sx, sy, c)
                    })
                    .sum();
            }
        })
        .expect("shape preserved")
    };
    pass(&pass(img, true), false)
}

/// Recovers the payload plane `clamp(r/alpha + 0.5)` from a marked image.
pub fn extract_payload(x_w: &Image, mode: ResidualMode<'_>, alpha: f64) -> Result<Image> {
    x_w.ensure_channels(3, "marked image")?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Param(format!("alpha must be > 0, got {alpha}")));
    }
    let carrier = match mode {
        ResidualMode::Blind => gaussian_blur(x_w),
        ResidualMode::Informed(x) => {
            x.ensure_same_shape(x_w, "clean carrier")?;
            x.clone()
        }
    };
    let data = x_w
        .data()
        .iter()
        .zip(carrier.data())
        .map(|(&a, &b)| ((a as f64 - b as f64) / alpha + 0.5).clamp(0.0, 1.0) as f32)
        .collect();
    Image::new(x_w.height(), x_w.width(), 3, data)
}

pub fn extract_residual(x_w: &Image, mode: ResidualMode<'_>, alpha: f64) -> Result<WatermarkBundle> {
    demosaic(&extract_payload(x_w, mode, alpha)?)
}

/// Bundle manifest as stored next to the TTWM payload files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub sem: String,
    pub pho: String,
    pub geo: String,
    pub height: usize,
    pub width: usize,
    pub source: String,
}

/// Writes `sem.ttwm`, `pho.ttwm`, `geo.ttwm` and `manifest.json` into `dir`.
pub fn save_bundle(bundle: &WatermarkBundle, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = BundleManifest {
        sem: "sem.ttwm".into(),
        pho: "pho.ttwm".into(),
        geo: "geo.ttwm".into(),
        height: bundle.height(),
        width: bundle.width(),
        source: bundle.provenance.as_str().into(),
    };
    write_ttwm(&bundle.sem, dir.join(&manifest.sem))?;
    write_ttwm(&bundle.pho, dir.join(&manifest.pho))?;
    write_ttwm(&bundle.geo, dir.join(&manifest.geo))?;
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Loads a bundle from a manifest path or a directory containing `manifest.json`.
///
/// Unrecognised `source` strings load as extracted bundles.
pub fn load_bundle(manifest_path: impl AsRef<Path>) -> Result<WatermarkBundle> {
    let mut path = manifest_path.as_ref().to_path_buf();
    if path.is_dir() {
        path = path.join("manifest.json");
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: BundleManifest = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let provenance = match manifest.source.as_str() {
        "reference" => Provenance::Reference,
        "ground_truth" => Provenance::GroundTruth,
        _ => Provenance::Extracted,
    };
    let bundle = WatermarkBundle::new(
        read_ttwm(base.join(&manifest.sem))?,
        read_ttwm(base.join(&manifest.pho))?,
        read_ttwm(base.join(&manifest.geo))?,
        provenance,
    )
    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if bundle.height() != manifest.height || bundle.width() != manifest.width {
        return Err(Error::Format(format!(
            "{}: manifest says {}x{}, payload is {}x{}",
            path.display(),
            manifest.height,
            manifest.width,
            bundle.height(),
            bundle.width()
        )));
    }
    Ok(bundle)
}
