//! Separable Gaussian blur and 2× box downsampling.

use crate::image::Image;

/// Normalised Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f32> {
    let r = radius as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| (v / s) as f32).collect()
}

/// Gaussian blur with edge replication. A zero `sigma` returns a copy.
pub fn gaussian_blur(img: &Image, sigma: f64, radius: usize) -> Image {
    if sigma <= 0.0 || radius == 0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma, radius);
    let (h, w, ch) = img.dims();
    let r = radius as i64;
    let pass = |src: &Image, horizontal: bool| {
        Image::from_fn(h, w, ch, |x, y, px| {
            for (c, v) in px.iter_mut().enumerate() {
                *v = (-r..=r)
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

/// Averages 2×2 blocks; an odd trailing row or column is dropped.
pub fn downsample2(img: &Image) -> Image {
    let (h, w, ch) = img.dims();
    let (hh, hw) = ((h / 2).max(1), (w / 2).max(1));
    Image::from_fn(hh, hw, ch, |x, y, px| {
        let xs = [2 * x, (2 * x + 1).min(w - 1)];
        let ys = [2 * y, (2 * y + 1).min(h - 1)];
        for (c, v) in px.iter_mut().enumerate() {
            *v = (img.get(xs[0], ys[0], c)
                + img.get(xs[1], ys[0], c)
                + img.get(xs[0], ys[1], c)
                + img.get(xs[1], ys[1], c))
                / 4.0;
        }
    })
    .expect("non-empty")
}
