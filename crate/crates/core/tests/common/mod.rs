//! Independent reference implementations shared by the integration tests.
//!
//! Everything here is written from textbook formulas in f64 and avoids the
//! library's code paths, so agreement is evidence rather than tautology.
#![allow(dead_code)]

use telltale::Image;

/// Bilinear resampling as a sum of tent kernels over every source pixel.
/// Pixels outside the image simply do not exist, which is zero fill.
pub fn tent_warp(img: &Image, m: &[[f64; 3]; 2]) -> Vec<f64> {
    let (h, w, ch) = img.dims();
    let tent = |d: f64| (1.0 - d.abs()).max(0.0);
    let mut out = vec![0.0; h * w * ch];
    for y in 0..h {
        for x in 0..w {
            let u = m[0][0] * x as f64 + m[0][1] * y as f64 + m[0][2];
            let v = m[1][0] * x as f64 + m[1][1] * y as f64 + m[1][2];
            for j in 0..h {
                let wy = tent(v - j as f64);
                if wy == 0.0 {
                    continue;
                }
                for i in 0..w {
                    let wx = tent(u - i as f64);
                    if wx == 0.0 {
                        continue;
                    }
                    for c in 0..ch {
                        out[(y * w + x) * ch + c] += wx * wy * img.get(i, j, c) as f64;
                    }
                }
            }
        }
    }
    out
}

pub type Mat3 = [[f64; 3]; 3];

pub fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn rotation(theta: f64) -> Mat3 {
    [
        [theta.cos(), -theta.sin(), 0.0],
        [theta.sin(), theta.cos(), 0.0],
        [0.0, 0.0, 1.0],
    ]
}

pub fn max_abs(a: &Mat3, b: &Mat3) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// RGB to HSV using the six-way case split on the maximum component.
pub fn hsv_of(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let c = max - min;
    let h = if c == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / c).rem_euclid(6.0)
    } else if max == g {
        (b - r) / c + 2.0
    } else {
        (r - g) / c + 4.0
    };
    let s = if max == 0.0 { 0.0 } else { c / max };
    (h / 6.0, s, max)
}

/// HSV to RGB with the closed form `v - v·s·max(0, min(k, 4 - k, 1))`.
pub fn rgb_of_hsv(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let f = |n: f64| {
        let k = (n + h * 6.0).rem_euclid(6.0);
        v - v * s * k.min(4.0 - k).clamp(0.0, 1.0)
    };
    (f(5.0), f(3.0), f(1.0))
}

/// HLS to RGB with the closed form `l - a·max(-1, min(k - 3, 9 - k, 1))`.
pub fn rgb_of_hls(h: f64, l: f64, s: f64) -> (f64, f64, f64) {
    let a = s * l.min(1.0 - l);
    let f = |n: f64| {
        let k = (n + h * 12.0).rem_euclid(12.0);
        l - a * (k - 3.0).min(9.0 - k).clamp(-1.0, 1.0)
    };
    (f(0.0), f(8.0), f(4.0))
}

pub fn luma(px: [f64; 3]) -> f64 {
    0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]
}

/// The photometric adjustments on one RGB image, in f64.
pub fn adjust_ref(img: &Image, op: &str, v: f64) -> Vec<f64> {
    let px: Vec<[f64; 3]> = img
        .data()
        .chunks_exact(3)
        .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
        .collect();
    let mean_luma = px.iter().map(|p| luma(*p).clamp(0.0, 1.0)).sum::<f64>() / px.len() as f64;
    px.iter()
        .flat_map(|&p| {
            let q = match op {
                "b" => p.map(|c| v * c),
                "c" => p.map(|c| v * c + (1.0 - v) * mean_luma),
                "s" => {
                    let l = luma(p).clamp(0.0, 1.0);
                    p.map(|c| v * c + (1.0 - v) * l)
                }
                "h" => {
                    let (h, s, val) = hsv_of(p[0], p[1], p[2]);
                    let (r, g, b) = rgb_of_hsv(h + v, s, val);
                    [r, g, b]
                }
                _ => panic!("unknown op {op}"),
            };
            q.map(|c| c.clamp(0.0, 1.0))
        })
        .collect()
}

pub fn max_diff(a: &[f32], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (*x as f64 - y).abs()).fold(0.0, f64::max)
}

/// Deterministic smooth-ish test image with values in [0, 1].
pub fn test_image(h: usize, w: usize, ch: usize, seed: u64) -> Image {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let data = (0..h * w * ch).map(|_| next() as f32).collect();
    Image::new(h, w, ch, data).unwrap()
}
