//! RGB rasters, the binary PPM interchange format, and the geometric
//! transforms used to build crop/flip views.

mod policy;
pub mod ppm;
mod transform;

pub use policy::{TransformPolicy, ViewSpec, FIVE_CROP, TEN_CROP};
pub use transform::{crop, fit_square, resize, resize_to_square};

use thiserror::Error;

/// Builds a named policy ("5C" or "10C") at the 256 → 224 geometry.
pub fn make_policy(name: &str) -> Result<TransformPolicy, ImagingError> {
    TransformPolicy::by_name(name)
}

/// Number of samples per pixel. Only RGB is supported.
pub const CHANNELS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImagingError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("sample buffer has {actual} bytes, expected {expected} for {width}x{height} RGB")]
    BufferSize {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("crop ({x},{y},{w},{h}) does not fit in a {width}x{height} image")]
    CropOutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
    #[error("unknown transform policy {0:?}")]
    UnknownPolicy(String),
    #[error("invalid transform policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Ppm(#[from] ppm::PpmError),
}

/// An 8-bit RGB raster stored row-major, three samples per pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage { width, height });
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(CHANNELS))
            .ok_or(ImagingError::EmptyImage { width, height })?;
        if data.len() != expected {
            return Err(ImagingError::BufferSize {
                width,
                height,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// An image with every sample set to `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![value; width * height * CHANNELS])
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self, ImagingError> {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..CHANNELS {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; CHANNELS] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("bytes", &self.data.len())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_buffer_length() {
        let err = Image::new(2, 2, vec![0; 11]).unwrap_err();
        assert!(matches!(
            err,
            ImagingError::BufferSize {
                expected: 12,
                actual: 11,
                ..
            }
        ));
    }

    #[test]
    fn rejects_zero_dimensions() {
        assert!(matches!(
            Image::new(0, 3, vec![]),
            Err(ImagingError::EmptyImage { .. })
        ));
    }

    #[test]
    fn from_fn_is_row_major_interleaved() {
        let img = Image::from_fn(2, 2, |x, y, c| (y * 100 + x * 10 + c) as u8).unwrap();
        assert_eq!(img.pixel(1, 0), [10, 11, 12]);
        assert_eq!(img.pixel(0, 1), [100, 101, 102]);
        assert_eq!(img.sample(1, 1, 2), 112);
    }
}
