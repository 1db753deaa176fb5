//! Dense channel-last image buffers.
//!
//! [`Image`] is the carrier for photographs, watermarks and masks alike. Values
//! are stored as `f32` so that the TTWM interchange format round-trips bit for
//! bit. Displayable images keep every sample in `[0, 1]`; intermediate buffers
//! produced during optimisation may leave that range.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!("channel count must be 1 or 3, got {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::filled(height, width, channels, 0.0)
    }

    /// Builds an image from a per-pixel function returning all channels of `(x, y)`.
    pub fn from_fn<F>(height: usize, width: usize, channels: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, &mut [f32]),
    {
        let mut img = Self::zeros(height, width, channels)?;
        for y in 0..height {
            for x in 0..width {
                let i = (y * width + x) * channels;
                f(x, y, &mut img.data[i..i + channels]);
            }
        }
        Ok(img)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn offset(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[self.offset(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f32) {
        let i = self.offset(x, y, c);
        self.data[i] = value;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = self.offset(x, y, 0);
        &self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    pub fn same_size(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn ensure_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!("{what}: {:?} vs {:?}", self.dims(), other.dims())))
        }
    }

    pub fn ensure_channels(&self, channels: usize, what: &str) -> Result<()> {
        if self.channels == channels {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what} expects {channels} channel(s), got {}",
                self.channels
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Image {
        Image {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn clamped(&self) -> Image {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn clamp_in_place(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Copy of a single channel as a 1-channel image.
    pub fn channel(&self, c: usize) -> Image {
        assert!(c < self.channels, "channel {c} out of range");
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.data.iter().skip(c).step_by(self.channels).copied().collect(),
        }
    }

    /// Interleaves three 1-channel planes into a 3-channel image.
    pub fn from_planes(planes: [&Image; 3]) -> Result<Image> {
        for p in &planes {
            p.ensure_channels(1, "plane")?;
            if !p.same_size(planes[0]) {
                return Err(Error::Shape("planes differ in size".into()));
            }
        }
        let n = planes[0].height * planes[0].width;
        let mut data = Vec::with_capacity(n * 3);
        for i in 0..n {
            data.extend(planes.iter().map(|p| p.data[i]));
        }
        Image::new(planes[0].height, planes[0].width, 3, data)
    }

    /// Replicates a 1-channel image across three channels.
    pub fn replicate3(&self) -> Result<Image> {
        self.ensure_channels(1, "replicate3")?;
        Image::new(
            self.height,
            self.width,
            3,
            self.data.iter().flat_map(|&v| [v, v, v]).collect(),
        )
    }

    /// Thresholds into a {0, 1} mask: values `>= threshold` become 1.
    pub fn binarized(&self, threshold: f32) -> Image {
        self.map(|v| if v >= threshold { 1.0 } else { 0.0 })
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize, usize)> for Image {
    type Output = f32;

    fn index(&self, (x, y, c): (usize, usize, usize)) -> &f32 {
        &self.data[self.offset(x, y, c)]
    }
}
