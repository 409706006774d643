//! Row-major `f64` raster plane used throughout the pipeline.

use crate::error::{Error, Result};

/// A single-channel image plane with `f64` samples, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl ImagePlane {
    /// All-zero plane of the given size.
    pub fn zeros(width: usize, height: usize) -> Self {
        ImagePlane {
            width,
            height,
            samples: vec![0.0; width * height],
        }
    }

    /// Wraps an existing row-major sample buffer; its length must be `width * height`.
    pub fn from_samples(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: samples.len(),
            });
        }
        Ok(ImagePlane {
            width,
            height,
            samples,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.samples[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.samples[row * self.width + col] = value;
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.samples[row * self.width..(row + 1) * self.width]
    }

    /// Copies the `rows x cols` window with top-left corner `(row0, col0)`.
    pub fn window(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> ImagePlane {
        assert!(row0 + rows <= self.height && col0 + cols <= self.width);
        let mut out = ImagePlane::zeros(cols, rows);
        for r in 0..rows {
            for c in 0..cols {
                out.set(r, c, self.get(row0 + r, col0 + c));
            }
        }
        out
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    /// Largest absolute sample difference against a plane of identical size.
    pub fn max_abs_diff(&self, other: &ImagePlane) -> f64 {
        assert_eq!(self.width, other.width);
        assert_eq!(self.height, other.height);
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
