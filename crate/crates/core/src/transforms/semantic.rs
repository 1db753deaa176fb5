//! Mask compositing for semantic edits.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::transforms::geometric::{apply_geometric, GeoOrder};
use crate::transforms::photometric::{apply_photometric, PhoOrder};
use crate::transforms::ranges::ParamRanges;

/// Content written into the masked region.
#[derive(Clone, Debug, PartialEq)]
pub enum Fill {
    Image(Image),
    /// A seeded random transform of the image being edited.
    Surrogate {
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemanticEdit {
    mask: Image,
    fill: Fill,
}

impl SemanticEdit {
    /// Grey masks are thresholded at 0.5.
    pub fn new(mask: Image, fill: Fill) -> Result<Self> {
        mask.ensure_channels(1, "semantic mask")?;
        if let Fill::Image(f) = &fill {
            if !f.same_size(&mask) {
                return Err(Error::Shape(format!(
                    "fill is {}x{}, mask is {}x{}",
                    f.height(),
                    f.width(),
                    mask.height(),
                    mask.width()
                )));
            }
        }
        let mask = if mask.is_binary() { mask } else { mask.binarized(0.5) };
        Ok(Self { mask, fill })
    }

    pub fn mask(&self) -> &Image {
        &self.mask
    }

    pub fn fill(&self) -> &Fill {
        &self.fill
    }
}

/// `(1 - m)·img + m·fill`, per pixel and channel.
pub fn apply_semantic(img: &Image, edit: &SemanticEdit) -> Result<Image> {
    let mask = edit.mask();
    if !img.same_size(mask) {
        return Err(Error::Shape(format!(
            "mask is {}x{}, image is {}x{}",
            mask.height(),
            mask.width(),
            img.height(),
            img.width()
        )));
    }
    let fill = match edit.fill() {
        Fill::Image(f) => f.clone(),
        Fill::Surrogate { seed } => surrogate_fill(img, *seed)?,
    };
    img.ensure_same_shape(&fill, "semantic fill")?;
    let ch = img.channels();
    let mut out = img.clone();
    for (i, &m) in mask.data().iter().enumerate() {
        for c in 0..ch {
            let j = i * ch + c;
            out.data_mut()[j] = (1.0 - m) * img.data()[j] + m * fill.data()[j];
        }
    }
    Ok(out)
}

/// A random photometric then geometric variant of `img`, parameters drawn from
/// the default boxes.
pub fn surrogate_fill(img: &Image, seed: u64) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranges = ParamRanges::default();
    let pho_order = *PhoOrder::all().choose(&mut rng).expect("24 orders");
    let pho = ranges.sample_pho(&mut rng);
    let geo_order = *GeoOrder::all().choose(&mut rng).expect("24 orders");
    let geo = ranges.sample_geo(&mut rng);
    let out = apply_photometric(img, &pho_order, &pho)?;
    apply_geometric(&out, &geo_order, &geo)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskShape {
    Rect,
    Ellipse,
}

/// A binary mask with one axis-aligned rectangle or ellipse covering roughly
/// `frac` of the image area.
pub fn shaped_mask(height: usize, width: usize, shape: MaskShape, frac: f64, seed: u64) -> Result<Image> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::Param(format!("mask fraction must be in (0, 1], got {frac}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hf, wf) = (height as f64, width as f64);
    let area = frac * hf * wf;
    let aspect: f64 = rng.gen_range(0.5..2.0);
    let mut img = Image::zeros(height, width, 1)?;
    match shape {
        MaskShape::Rect => {
            let rw = (area * aspect).sqrt().clamp(1.0, wf);
            let rh = (area / rw).clamp(1.0, hf);
            let (rw, rh) = (rw.round() as usize, rh.round() as usize);
            let x0 = rng.gen_range(0..=width - rw);
            let y0 = rng.gen_range(0..=height - rh);
            for y in y0..y0 + rh {
                for x in x0..x0 + rw {
                    img.set(x, y, 0, 1.0);
                }
            }
        }
        MaskShape::Ellipse => {
            let pi = std::f64::consts::PI;
            let a = (area * aspect / pi).sqrt().clamp(0.5, wf / 2.0);
            let b = (area / (pi * a)).clamp(0.5, hf / 2.0);
            let cx = rng.gen_range(a - 0.5..=wf - a - 0.5 + 1e-9);
            let cy = rng.gen_range(b - 0.5..=hf - b - 0.5 + 1e-9);
            for y in 0..height {
                for x in 0..width {
                    let (dx, dy) = ((x as f64 - cx) / a, (y as f64 - cy) / b);
                    if dx * dx + dy * dy <= 1.0 {
                        img.set(x, y, 0, 1.0);
                    }
                }
            }
        }
    }
    Ok(img)
}

/// A rectangle or ellipse covering a uniform random 5–30% of the area.
pub fn random_mask(height: usize, width: usize, seed: u64) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = if rng.gen::<bool>() {
        MaskShape::Rect
    } else {
        MaskShape::Ellipse
    };
    let frac = rng.gen_range(0.05..=0.30);
    shaped_mask(height, width, shape, frac, rng.gen())
}
