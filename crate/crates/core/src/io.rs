//! TTWM tensor files and 8-bit PNG.
//!
//! TTWM layout (all integers little-endian):
//!
//! | offset | size | content                          |
//! |--------|------|----------------------------------|
//! | 0      | 4    | magic `TTWM`                     |
//! | 4      | 1    | version `0x01`                   |
//! | 5      | 4    | height (u32)                     |
//! | 9      | 4    | width (u32)                      |
//! | 13     | 4    | channels (u32)                   |
//! | 17     | 4·n  | samples, binary32, channel-last  |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

pub const TTWM_MAGIC: &[u8; 4] = b"TTWM";
pub const TTWM_VERSION: u8 = 0x01;
const HEADER_LEN: usize = 17;

pub fn encode_ttwm(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * img.len());
    out.extend_from_slice(TTWM_MAGIC);
    out.push(TTWM_VERSION);
    for dim in [img.height(), img.width(), img.channels()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_ttwm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("truncated TTWM header: {} bytes", bytes.len())));
    }
    if &bytes[0..4] != TTWM_MAGIC {
        return Err(Error::Format(format!("bad TTWM magic {:?}", &bytes[0..4])));
    }
    if bytes[4] != TTWM_VERSION {
        return Err(Error::Format(format!("unsupported TTWM version {:#04x}", bytes[4])));
    }
    let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (height, width, channels) = (dim(5), dim(9), dim(13));
    let n = height
        .checked_mul(width)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| Error::Format("TTWM dimensions overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 4 * n {
        return Err(Error::Format(format!(
            "TTWM payload is {} bytes, expected {} for {height}x{width}x{channels}",
            payload.len(),
            4 * n
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Image::new(height, width, channels, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_ttwm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ttwm(img)).map_err(|e| Error::io(path, e))
}

pub fn read_ttwm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ttwm(&bytes)
}

/// Writes an 8-bit gray or RGB PNG, quantising each sample as `round(255 v)`.
pub fn write_png(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let color = if img.channels() == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    image::save_buffer_with_format(path.as_ref(), &bytes, w, h, color, image::ImageFormat::Png)?;
    Ok(())
}

/// Reads a PNG as gray (1 channel) or RGB (3 channels); alpha is dropped.
pub fn read_png(path: impl AsRef<Path>) -> Result<Image> {
    let dynamic = image::open(path.as_ref())?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let (channels, raw) = if dynamic.color().has_color() {
        (3, dynamic.to_rgb8().into_raw())
    } else {
        (1, dynamic.to_luma8().into_raw())
    };
    let data = raw.into_iter().map(|b| b as f32 / 255.0).collect();
    Image::new(h, w, channels, data)
}

/// Reads a PNG as RGB and resamples it to `height`×`width` with a triangle
/// filter when its size differs.
pub fn read_png_rgb_resized(path: impl AsRef<Path>, height: usize, width: usize) -> Result<Image> {
    let mut rgb = image::open(path.as_ref())?.to_rgb8();
    if rgb.height() as usize != height || rgb.width() as usize != width {
        rgb = image::imageops::resize(&rgb, width as u32, height as u32, image::imageops::FilterType::Triangle);
    }
    let data = rgb.into_raw().into_iter().map(|b| b as f32 / 255.0).collect();
    Image::new(height, width, 3, data)
}

/// Reads either format, dispatching on the file extension.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("png") => read_png(path),
        _ => read_ttwm(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_image_byte_count() {
        let img = Image::zeros(2, 2, 1).unwrap();
        let bytes = encode_ttwm(&img);
        assert_eq!(bytes.len(), 33);
        assert_eq!(&bytes[0..5], b"TTWM\x01");
        assert_eq!(&bytes[5..9], &2u32.to_le_bytes());
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let mut bytes = encode_ttwm(&Image::zeros(2, 2, 1).unwrap());
        let good = bytes.clone();
        bytes[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_ttwm(&bytes), Err(Error::Format(_))));

        let mut bytes = good.clone();
        bytes[4] = 2;
        assert!(matches!(decode_ttwm(&bytes), Err(Error::Format(_))));

        assert!(matches!(decode_ttwm(&good[..good.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(decode_ttwm(&good[..10]), Err(Error::Format(_))));
    }

    #[test]
    fn file_round_trip_and_png_quantisation() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_fn(3, 4, 3, |x, y, px| {
            px.copy_from_slice(&[x as f32 / 3.0, y as f32 / 2.0, 0.123]);
        })
        .unwrap();
        let p = dir.path().join("a.ttwm");
        write_ttwm(&img, &p).unwrap();
        assert_eq!(read_ttwm(&p).unwrap(), img);

        let p = dir.path().join("a.png");
        write_png(&img, &p).unwrap();
        let back = read_png(&p).unwrap();
        assert_eq!(back.dims(), img.dims());
        for (a, b) in back.data().iter().zip(img.data()) {
            assert_eq!(*a, (b * 255.0).round() / 255.0);
        }
        let gray = img.channel(0);
        write_png(&gray, &p).unwrap();
        assert_eq!(read_png(&p).unwrap().channels(), 1);
    }

    proptest! {
        #[test]
        fn ttwm_round_trip_is_bitwise(
            h in 1usize..5, w in 1usize..5, three in any::<bool>(),
            seed in proptest::collection::vec(-1e6f32..1e6, 75)
        ) {
            let c = if three { 3 } else { 1 };
            let img = Image::new(h, w, c, seed[..h * w * c].to_vec()).unwrap();
            let back = decode_ttwm(&encode_ttwm(&img)).unwrap();
            prop_assert!(back.data().iter().zip(img.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(back.dims(), img.dims());
        }
    }
}
