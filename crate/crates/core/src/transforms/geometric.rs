//! Rotation, translation, scaling and shearing applied as sequential warps.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::transforms::affine::{step_matrix, AffineMatrix};
use crate::transforms::perm::{ClassMember, Permutation};
use crate::transforms::warp::warp_bilinear;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeoOp {
    Ro,
    Tr,
    Sc,
    Sh,
}

impl ClassMember for GeoOp {
    const ALL: [Self; 4] = [GeoOp::Ro, GeoOp::Tr, GeoOp::Sc, GeoOp::Sh];

    fn name(self) -> &'static str {
        match self {
            GeoOp::Ro => "ro",
            GeoOp::Tr => "tr",
            GeoOp::Sc => "sc",
            GeoOp::Sh => "sh",
        }
    }
}

pub type GeoOrder = Permutation<GeoOp>;

/// Geometric parameters. Angles are radians, translations are fractions of
/// the image width/height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeoParams {
    pub ro: f64,
    pub tr_x: f64,
    pub tr_y: f64,
    pub sc: f64,
    pub sh_x: f64,
    pub sh_y: f64,
}

impl Default for GeoParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl GeoParams {
    pub const LEN: usize = 6;
    pub const NAMES: [&'static str; 6] = ["ro", "tr_x", "tr_y", "sc", "sh_x", "sh_y"];

    pub const fn identity() -> Self {
        Self {
            ro: 0.0,
            tr_x: 0.0,
            tr_y: 0.0,
            sc: 1.0,
            sh_x: 0.0,
            sh_y: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.to_array().iter().all(|v| v.is_finite()) {
            return Err(Error::Param(format!("non-finite geometric parameter in {self:?}")));
        }
        if self.sc <= 1e-3 {
            return Err(Error::Param(format!("scale must exceed 1e-3, got {}", self.sc)));
        }
        if self.sh_x.abs() >= FRAC_PI_2 || self.sh_y.abs() >= FRAC_PI_2 {
            return Err(Error::Param(format!(
                "shear angles must lie in (-π/2, π/2), got {} and {}",
                self.sh_x, self.sh_y
            )));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.ro, self.tr_x, self.tr_y, self.sc, self.sh_x, self.sh_y]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            ro: v[0],
            tr_x: v[1],
            tr_y: v[2],
            sc: v[3],
            sh_x: v[4],
            sh_y: v[5],
        }
    }

    /// Indices into [`GeoParams::to_array`] owned by `op`.
    pub fn indices(op: GeoOp) -> &'static [usize] {
        match op {
            GeoOp::Ro => &[0],
            GeoOp::Tr => &[1, 2],
            GeoOp::Sc => &[3],
            GeoOp::Sh => &[4, 5],
        }
    }

    pub fn is_identity_for(&self, op: GeoOp) -> bool {
        match op {
            GeoOp::Ro => self.ro == 0.0,
            GeoOp::Tr => self.tr_x == 0.0 && self.tr_y == 0.0,
            GeoOp::Sc => self.sc == 1.0,
            GeoOp::Sh => self.sh_x == 0.0 && self.sh_y == 0.0,
        }
    }
}

/// One warp of the sequence. Identity steps return a copy, which is exactly
/// what the warp would produce.
pub fn geometric_step(img: &Image, op: GeoOp, params: &GeoParams) -> Result<Image> {
    if params.is_identity_for(op) {
        params.validate()?;
        return Ok(img.clone());
    }
    let m = step_matrix(op, params, img.width(), img.height())?;
    Ok(warp_bilinear(img, &m))
}

/// Applies the four warps in `order`, resampling and zero-filling after each.
pub fn apply_geometric(img: &Image, order: &GeoOrder, params: &GeoParams) -> Result<Image> {
    params.validate()?;
    let mut out = img.clone();
    for op in order.iter() {
        out = geometric_step(&out, op, params)?;
    }
    Ok(out)
}

/// The single output->source matrix equivalent to the whole sequence when no
/// intermediate sample leaves the image.
pub fn composed_matrix(order: &GeoOrder, params: &GeoParams, width: usize, height: usize) -> Result<AffineMatrix> {
    params.validate()?;
    order.iter().try_fold(AffineMatrix::IDENTITY, |acc, op| {
        Ok(acc * step_matrix(op, params, width, height)?)
    })
}

/// Single-resample variant of [`apply_geometric`].
///
/// Faster and less blurry, but content pushed outside the frame by an early
/// step and pulled back by a later one survives here, whereas the sequential
/// version has already zeroed it.
pub fn apply_geometric_composed(img: &Image, order: &GeoOrder, params: &GeoParams) -> Result<Image> {
    let m = composed_matrix(order, params, img.width(), img.height())?;
    Ok(warp_bilinear(img, &m))
}
