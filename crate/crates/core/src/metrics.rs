//! Fidelity (L1, L∞, PSNR, SSIM), synchronicity (MAE) and mask agreement (IoU).

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// PSNR reported for identical inputs.
pub const PSNR_CAP_DB: f64 = 100.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check(a: &Image, b: &Image) -> Result<()> {
    a.ensure_same_shape(b, "metric inputs")
}

fn abs_diffs<'a>(a: &'a Image, b: &'a Image) -> impl Iterator<Item = f64> + 'a {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (*x as f64 - *y as f64).abs())
}

/// Mean absolute difference.
pub fn l1(a: &Image, b: &Image) -> Result<f64> {
    check(a, b)?;
    Ok(abs_diffs(a, b).sum::<f64>() / a.len() as f64)
}

/// Maximum absolute difference.
pub fn linf(a: &Image, b: &Image) -> Result<f64> {
    check(a, b)?;
    Ok(abs_diffs(a, b).fold(0.0, f64::max))
}

/// Same quantity as [`l1`], named for the synchronicity context.
pub fn mae(a: &Image, b: &Image) -> Result<f64> {
    l1(a, b)
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check(a, b)?;
    Ok(abs_diffs(a, b).map(|d| d * d).sum::<f64>() / a.len() as f64)
}

/// Peak signal-to-noise ratio for unit peak value, capped at 100 dB.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

fn gaussian_kernel(len: usize) -> Vec<f64> {
    let c = (len as f64 - 1.0) / 2.0;
    let k: Vec<f64> = (0..len)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable 'valid' filtering of a plane with `kx` along rows and `ky` down columns.
fn filter_valid(plane: &[f64], h: usize, w: usize, kx: &[f64], ky: &[f64]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - kx.len(), h + 1 - ky.len());
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = kx.iter().enumerate().map(|(i, k)| k * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = ky.iter().enumerate().map(|(i, k)| k * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let kx = gaussian_kernel(SSIM_WINDOW.min(w));
    let ky = gaussian_kernel(SSIM_WINDOW.min(h));
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(a, h, w, &kx, &ky);
    let mu_b = filter_valid(b, h, w, &kx, &ky);
    let e_aa = filter_valid(&prod(a, a), h, w, &kx, &ky);
    let e_bb = filter_valid(&prod(b, b), h, w, &kx, &ky);
    let e_ab = filter_valid(&prod(a, b), h, w, &kx, &ky);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
    }
    total / n as f64
}

/// Single-scale SSIM: 11×11 Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03,
/// unit dynamic range, averaged over valid window positions and channels.
/// Images smaller than the window use a window shrunk to fit.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check(a, b)?;
    let (h, w, ch) = a.dims();
    let mut total = 0.0;
    for c in 0..ch {
        let pa: Vec<f64> = a.data().iter().skip(c).step_by(ch).map(|&v| v as f64).collect();
        let pb: Vec<f64> = b.data().iter().skip(c).step_by(ch).map(|&v| v as f64).collect();
        total += ssim_plane(&pa, &pb, h, w);
    }
    Ok((total / ch as f64).clamp(-1.0, 1.0))
}

/// Intersection over union of two masks binarised at 0.5. Two empty masks
/// agree perfectly.
pub fn iou(a: &Image, b: &Image) -> Result<f64> {
    check(a, b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (x, y) in a.data().iter().zip(b.data()) {
        let (p, q) = (*x >= 0.5, *y >= 0.5);
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    Linf,
    Psnr,
    Ssim,
    Mae,
    Iou,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "l1" => Metric::L1,
            "linf" => Metric::Linf,
            "psnr" => Metric::Psnr,
            "ssim" => Metric::Ssim,
            "mae" => Metric::Mae,
            "iou" => Metric::Iou,
            other => return Err(Error::Param(format!("unknown metric {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
}

pub fn evaluate(a: &Image, b: &Image, which: &[Metric]) -> Result<MetricReport> {
    let mut r = MetricReport::default();
    for m in which {
        match m {
            Metric::L1 => r.l1 = Some(l1(a, b)?),
            Metric::Linf => r.linf = Some(linf(a, b)?),
            Metric::Psnr => r.psnr_db = Some(psnr(a, b)?),
            Metric::Ssim => r.ssim = Some(ssim(a, b)?),
            Metric::Mae => r.mae = Some(mae(a, b)?),
            Metric::Iou => r.iou = Some(iou(a, b)?),
        }
    }
    Ok(r)
}

/// L1, L∞, PSNR and SSIM together.
pub fn fidelity(a: &Image, b: &Image) -> Result<MetricReport> {
    evaluate(a, b, &[Metric::L1, Metric::Linf, Metric::Psnr, Metric::Ssim])
}
