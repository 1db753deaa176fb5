use crate::image::Image;
use crate::transforms::affine::AffineMatrix;

/// Resamples `img` through the output->source map `m` with bilinear weights.
///
/// Corners that fall outside the source contribute zero, so samples near or
/// beyond the border fade to black.
pub fn warp_bilinear(img: &Image, m: &AffineMatrix) -> Image {
    let (h, w, ch) = img.dims();
    let mut out = vec![0.0f32; img.len()];
    let finite = m.0[..2].iter().flatten().all(|v| v.is_finite());
    if finite {
        match ch {
            1 => warp_into::<1>(img.data(), h, w, m, &mut out),
            3 => warp_into::<3>(img.data(), h, w, m, &mut out),
            _ => unreachable!("images have 1 or 3 channels"),
        }
    }
    Image::new(h, w, ch, out).expect("shape preserved")
}

#[inline]
fn floor_i64(v: f64) -> i64 {
    let t = v as i64;
    if (t as f64) > v {
        t - 1
    } else {
        t
    }
}

fn warp_into<const CH: usize>(src: &[f32], h: usize, w: usize, m: &AffineMatrix, out: &mut [f32]) {
    let [r0, r1, _] = m.0;
    let (wi, hi) = (w as i64, h as i64);
    // coordinates beyond this cannot touch the image and would overflow the
    // integer conversion
    let limit = (w.max(h) + 2) as f64;
    let row = w * CH;

    for y in 0..h {
        let yf = y as f64;
        let bu = r0[1] * yf + r0[2];
        let bv = r1[1] * yf + r1[2];
        let out_row = &mut out[y * row..(y + 1) * row];
        for x in 0..w {
            let xf = x as f64;
            let u = r0[0] * xf + bu;
            let v = r1[0] * xf + bv;
            if !(u > -1.0 - 1e-9 && v > -1.0 - 1e-9 && u < limit && v < limit) {
                continue;
            }
            let x0 = floor_i64(u);
            let y0 = floor_i64(v);
            if x0 < -1 || y0 < -1 || x0 >= wi || y0 >= hi {
                continue;
            }
            let fx = (u - x0 as f64) as f32;
            let fy = (v - y0 as f64) as f32;
            let px = &mut out_row[x * CH..(x + 1) * CH];

            if x0 >= 0 && y0 >= 0 && x0 + 1 < wi && y0 + 1 < hi {
                let nw = y0 as usize * row + x0 as usize * CH;
                let top = &src[nw..nw + 2 * CH];
                let bottom = &src[nw + row..nw + row + 2 * CH];
                let wnw = (1.0 - fx) * (1.0 - fy);
                let wne = fx * (1.0 - fy);
                let wsw = (1.0 - fx) * fy;
                let wse = fx * fy;
                for c in 0..CH {
                    px[c] = wnw * top[c] + wne * top[CH + c] + wsw * bottom[c] + wse * bottom[CH + c];
                }
                continue;
            }

            let corners = [
                (x0, y0, (1.0 - fx) * (1.0 - fy)),
                (x0 + 1, y0, fx * (1.0 - fy)),
                (x0, y0 + 1, (1.0 - fx) * fy),
                (x0 + 1, y0 + 1, fx * fy),
            ];
            for (cx, cy, wt) in corners {
                if cx < 0 || cy < 0 || cx >= wi || cy >= hi {
                    continue;
                }
                let s = cy as usize * row + cx as usize * CH;
                for c in 0..CH {
                    px[c] += wt * src[s + c];
                }
            }
        }
    }
}
