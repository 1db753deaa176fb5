//! RGB, HLS and HSV conversions and grayscale luminance.
//!
//! Hue is a fraction of a full cycle in `[0, 1)`. Inputs are clamped to the
//! unit cube before conversion.

use crate::error::Result;
use crate::image::Image;

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hls {
    pub h: f64,
    pub l: f64,
    pub s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl Rgb {
    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b }
    }

    fn clamped(self) -> Self {
        Self::new(clamp01(self.r), clamp01(self.g), clamp01(self.b))
    }
}

impl Hls {
    pub const fn new(h: f64, l: f64, s: f64) -> Self {
        Self { h, l, s }
    }
}

impl Hsv {
    pub const fn new(h: f64, s: f64, v: f64) -> Self {
        Self { h, s, v }
    }
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Wraps a hue into `[0, 1)`.
pub fn wrap_hue(h: f64) -> f64 {
    let w = h - floor(h);
    // can round up to exactly 1.0 for tiny negative inputs
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// `f64::floor` without the libm call on targets lacking a rounding
/// instruction; this sits in the per-pixel hue path.
#[inline]
fn floor(v: f64) -> f64 {
    if v.abs() < 4.0e18 {
        let t = v as i64 as f64;
        if t > v {
            t - 1.0
        } else {
            t
        }
    } else {
        v.floor()
    }
}

/// Hue of an RGB triple given its extrema; shared by HLS and HSV.
fn hue_of(p: Rgb, maxc: f64, minc: f64) -> f64 {
    let span = maxc - minc;
    let rc = (maxc - p.r) / span;
    let gc = (maxc - p.g) / span;
    let bc = (maxc - p.b) / span;
    let h = if p.r == maxc {
        bc - gc
    } else if p.g == maxc {
        2.0 + rc - bc
    } else {
        4.0 + gc - rc
    };
    wrap_hue(h / 6.0)
}

pub fn rgb_to_hls(p: Rgb) -> Hls {
    let p = p.clamped();
    let maxc = p.r.max(p.g).max(p.b);
    let minc = p.r.min(p.g).min(p.b);
    let l = (minc + maxc) / 2.0;
    if minc == maxc {
        return Hls::new(0.0, l, 0.0);
    }
    let span = maxc - minc;
    let s = if l <= 0.5 {
        span / (maxc + minc)
    } else {
        span / (2.0 - maxc - minc)
    };
    Hls::new(hue_of(p, maxc, minc), l, s)
}

pub fn hls_to_rgb(p: Hls) -> Rgb {
    let h = wrap_hue(p.h);
    let l = clamp01(p.l);
    let s = clamp01(p.s);
    if s == 0.0 {
        return Rgb::new(l, l, l);
    }
    let m2 = if l <= 0.5 { l * (1.0 + s) } else { l + s - l * s };
    let m1 = 2.0 * l - m2;
    Rgb::new(
        hls_component(m1, m2, h + 1.0 / 3.0),
        hls_component(m1, m2, h),
        hls_component(m1, m2, h - 1.0 / 3.0),
    )
    .clamped()
}

fn hls_component(m1: f64, m2: f64, hue: f64) -> f64 {
    let hue = hue - floor(hue);
    if hue < 1.0 / 6.0 {
        m1 + (m2 - m1) * hue * 6.0
    } else if hue < 0.5 {
        m2
    } else if hue < 2.0 / 3.0 {
        m1 + (m2 - m1) * (2.0 / 3.0 - hue) * 6.0
    } else {
        m1
    }
}

pub fn rgb_to_hsv(p: Rgb) -> Hsv {
    let p = p.clamped();
    let maxc = p.r.max(p.g).max(p.b);
    let minc = p.r.min(p.g).min(p.b);
    if maxc == minc {
        return Hsv::new(0.0, 0.0, maxc);
    }
    Hsv::new(hue_of(p, maxc, minc), (maxc - minc) / maxc, maxc)
}

pub fn hsv_to_rgb(p: Hsv) -> Rgb {
    let h = wrap_hue(p.h);
    let s = clamp01(p.s);
    let v = clamp01(p.v);
    if s == 0.0 {
        return Rgb::new(v, v, v);
    }
    let sector = floor(h * 6.0);
    let f = h * 6.0 - sector;
    let p_ = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector as i32 % 6 {
        0 => (v, t, p_),
        1 => (q, v, p_),
        2 => (p_, v, t),
        3 => (p_, q, v),
        4 => (t, p_, v),
        _ => (v, p_, q),
    };
    Rgb::new(r, g, b).clamped()
}

/// Per-pixel BT.601 luminance of a 3-channel image, clamped to `[0, 1]`.
pub fn luminance(img: &Image) -> Result<Image> {
    img.ensure_channels(3, "luminance")?;
    let data = img.data().chunks_exact(3).map(|px| luma(px).clamp(0.0, 1.0)).collect();
    Image::new(img.height(), img.width(), 1, data)
}

#[inline]
pub(crate) fn luma(px: &[f32]) -> f32 {
    LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2]
}
