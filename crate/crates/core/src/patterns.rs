//! Reference watermarks: a blank semantic canvas, an HLS colour wheel and a
//! radially chirped wave-interference grating.
//!
//! Pixel `(x, y)` is (column, row), 0-based. Normalised coordinates are
//! `x̄ = 2x/(width-1) - 1` and `ȳ = 2y/(height-1) - 1`, so corners land exactly
//! on ±1 and odd-sized images have an exact centre pixel.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::channel::{Provenance, WatermarkBundle};
use crate::color::{hls_to_rgb, wrap_hue, Hls};
use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternConfig {
    pub height: usize,
    pub width: usize,
    /// Hue rotation of the colour wheel, radians.
    pub delta_phi: f64,
    /// Grating frequency at the centre, cycles per normalised unit.
    pub xi_min: f64,
    /// Grating frequency at the corners, cycles per normalised unit.
    pub xi_max: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            height: 128,
            width: 128,
            delta_phi: 0.0,
            xi_min: 2.0,
            xi_max: 10.0,
        }
    }
}

impl PatternConfig {
    pub fn with_size(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height < 2 || self.width < 2 {
            return Err(Error::Param(format!(
                "pattern size must be at least 2x2, got {}x{}",
                self.height, self.width
            )));
        }
        if !(self.xi_min >= 0.0 && self.xi_max >= self.xi_min) {
            return Err(Error::Param(format!(
                "need 0 <= xi_min <= xi_max, got {} and {}",
                self.xi_min, self.xi_max
            )));
        }
        if !self.delta_phi.is_finite() || !self.xi_max.is_finite() {
            return Err(Error::Param("pattern parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Normalised coordinate of pixel index `i` along an axis of length `n`.
///
/// The numerator is an exact integer so mirrored pixels get exactly negated
/// coordinates.
#[inline]
pub fn normalized(i: usize, n: usize) -> f64 {
    (2.0 * i as f64 - (n - 1) as f64) / (n - 1) as f64
}

/// Per-pixel polar coordinates, row-major.
#[derive(Clone, Debug)]
pub struct PolarField {
    pub height: usize,
    pub width: usize,
    /// Radius in `[0, √2]`.
    pub rho: Vec<f64>,
    /// Angle in `(-π, π]`.
    pub phi: Vec<f64>,
}

impl PolarField {
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.rho[i], self.phi[i])
    }
}

pub fn polar_coords(cfg: &PatternConfig) -> Result<PolarField> {
    cfg.validate()?;
    let n = cfg.height * cfg.width;
    let mut rho = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for y in 0..cfg.height {
        let yb = normalized(y, cfg.height);
        for x in 0..cfg.width {
            let xb = normalized(x, cfg.width);
            rho.push((xb * xb + yb * yb).sqrt());
            phi.push(yb.atan2(xb));
        }
    }
    Ok(PolarField {
        height: cfg.height,
        width: cfg.width,
        rho,
        phi,
    })
}

pub fn make_semantic(cfg: &PatternConfig) -> Result<Image> {
    cfg.validate()?;
    Image::zeros(cfg.height, cfg.width, 1)
}

pub fn make_photometric(cfg: &PatternConfig) -> Result<Image> {
    let field = polar_coords(cfg)?;
    Image::from_fn(cfg.height, cfg.width, 3, |x, y, px| {
        let (rho, phi) = field.at(x, y);
        let h = wrap_hue((phi + cfg.delta_phi) / (2.0 * PI));
        let l = 1.0 - rho / SQRT_2;
        let rgb = hls_to_rgb(Hls::new(h, l, 1.0));
        px.copy_from_slice(&[rgb.r as f32, rgb.g as f32, rgb.b as f32]);
    })
}

pub fn make_geometric(cfg: &PatternConfig) -> Result<Image> {
    cfg.validate()?;
    Image::from_fn(cfg.height, cfg.width, 1, |x, y, px| {
        let xb = normalized(x, cfg.width);
        let yb = normalized(y, cfg.height);
        let rho = (xb * xb + yb * yb).sqrt();
        let xi = cfg.xi_min + (cfg.xi_max - cfg.xi_min) * rho / SQRT_2;
        let omega = 2.0 * PI * xi;
        let psi = (omega * xb).sin() * (omega * yb).sin();
        px[0] = ((1.0 + psi) / 2.0).clamp(0.0, 1.0) as f32;
    })
}

/// All three reference watermarks.
pub fn make_references(cfg: &PatternConfig) -> Result<WatermarkBundle> {
    WatermarkBundle::new(
        make_semantic(cfg)?,
        make_photometric(cfg)?,
        make_geometric(cfg)?,
        Provenance::Reference,
    )
}
