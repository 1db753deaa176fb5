//! Brightness, contrast, hue and saturation adjustments.

use serde::{Deserialize, Serialize};

use crate::color::{hsv_to_rgb, luma, rgb_to_hsv, Hsv, Rgb};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::transforms::perm::{ClassMember, Permutation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhoOp {
    B,
    C,
    H,
    S,
}

impl ClassMember for PhoOp {
    const ALL: [Self; 4] = [PhoOp::B, PhoOp::C, PhoOp::H, PhoOp::S];

    fn name(self) -> &'static str {
        match self {
            PhoOp::B => "b",
            PhoOp::C => "c",
            PhoOp::H => "h",
            PhoOp::S => "s",
        }
    }
}

pub type PhoOrder = Permutation<PhoOp>;

/// Brightness, contrast and saturation factors plus a hue shift in cycles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhoParams {
    pub b: f64,
    pub c: f64,
    pub h: f64,
    pub s: f64,
}

impl Default for PhoParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl PhoParams {
    pub const LEN: usize = 4;
    pub const NAMES: [&'static str; 4] = ["b", "c", "h", "s"];

    pub const fn identity() -> Self {
        Self {
            b: 1.0,
            c: 1.0,
            h: 0.0,
            s: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.to_array().iter().all(|v| v.is_finite()) {
            return Err(Error::Param(format!("non-finite photometric parameter in {self:?}")));
        }
        for (name, v) in [("brightness", self.b), ("contrast", self.c), ("saturation", self.s)] {
            if v < 0.0 {
                return Err(Error::Param(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.b, self.c, self.h, self.s]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            b: v[0],
            c: v[1],
            h: v[2],
            s: v[3],
        }
    }

    pub fn value(&self, op: PhoOp) -> f64 {
        match op {
            PhoOp::B => self.b,
            PhoOp::C => self.c,
            PhoOp::H => self.h,
            PhoOp::S => self.s,
        }
    }

    pub fn index(op: PhoOp) -> usize {
        op as usize
    }
}

/// Applies one adjustment and clamps the result to `[0, 1]`.
///
/// One-channel images have no hue or saturation; those adjustments leave
/// them unchanged and contrast anchors on the plain mean.
pub fn adjust(img: &Image, kind: PhoOp, value: f64) -> Result<Image> {
    if !value.is_finite() {
        return Err(Error::Param(format!("{kind:?} value is not finite")));
    }
    if kind != PhoOp::H && value < 0.0 {
        return Err(Error::Param(format!(
            "{} factor must be non-negative, got {value}",
            kind.name()
        )));
    }
    let v = value as f32;
    let mut out = img.clone();
    let three = img.channels() == 3;
    match kind {
        PhoOp::B => {
            for p in out.data_mut() {
                *p *= v;
            }
        }
        PhoOp::C => {
            let mu = if three {
                let sum: f64 = img
                    .data()
                    .chunks_exact(3)
                    .map(|px| luma(px).clamp(0.0, 1.0) as f64)
                    .sum();
                (sum / (img.height() * img.width()) as f64) as f32
            } else {
                img.mean() as f32
            };
            let offset = (1.0 - v) * mu;
            for p in out.data_mut() {
                *p = v * *p + offset;
            }
        }
        PhoOp::H if three => {
            for px in out.data_mut().chunks_exact_mut(3) {
                let hsv = rgb_to_hsv(Rgb::new(px[0] as f64, px[1] as f64, px[2] as f64));
                let rgb = hsv_to_rgb(Hsv::new(hsv.h + value, hsv.s, hsv.v));
                px.copy_from_slice(&[rgb.r as f32, rgb.g as f32, rgb.b as f32]);
            }
        }
        PhoOp::S if three => {
            for px in out.data_mut().chunks_exact_mut(3) {
                let l = (1.0 - v) * luma(px).clamp(0.0, 1.0);
                for p in px.iter_mut() {
                    *p = v * *p + l;
                }
            }
        }
        PhoOp::H | PhoOp::S => {}
    }
    out.clamp_in_place();
    Ok(out)
}

pub fn apply_photometric(img: &Image, order: &PhoOrder, params: &PhoParams) -> Result<Image> {
    params.validate()?;
    let mut out = img.clone();
    for op in order.iter() {
        out = adjust(&out, op, params.value(op))?;
    }
    Ok(out)
}
