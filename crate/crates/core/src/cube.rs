//! In-memory spectral image cube.
//!
//! H x W x B of f32 stored as band-major planes, row-major within each
//! plane — the same layout the on-disk `HSC1` container uses, so
//! serialization is a header plus one contiguous copy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCube {
    width: usize,
    height: usize,
    bands: usize,
    data: Vec<f32>,
}

impl SpectralCube {
    pub fn zeros(width: usize, height: usize, bands: usize) -> Self {
        SpectralCube {
            width,
            height,
            bands,
            data: vec![0.0; width * height * bands],
        }
    }

    pub fn from_data(width: usize, height: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * bands {
            return Err(Error::Invalid {
                context: "spectral cube",
                detail: format!(
                    "payload length {} does not match {width}x{height}x{bands}",
                    data.len()
                ),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid {
                context: "spectral cube",
                detail: format!("non-finite value at element {idx}"),
            });
        }
        Ok(SpectralCube {
            width,
            height,
            bands,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, b: usize) -> f32 {
        self.data[b * self.width * self.height + y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, b: usize, v: f32) {
        self.data[b * self.width * self.height + y * self.width + x] = v;
    }

    /// Gathers the per-band spectrum of one pixel as f64.
    pub fn pixel_spectrum(&self, x: usize, y: usize) -> Vec<f64> {
        let plane = self.width * self.height;
        let offset = y * self.width + x;
        (0..self.bands)
            .map(|b| self.data[b * plane + offset] as f64)
            .collect()
    }

    pub fn set_pixel_spectrum(&mut self, x: usize, y: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.bands);
        let plane = self.width * self.height;
        let offset = y * self.width + x;
        for (b, &v) in values.iter().enumerate() {
            self.data[b * plane + offset] = v as f32;
        }
    }

    pub fn same_shape(&self, other: &SpectralCube) -> bool {
        self.width == other.width && self.height == other.height && self.bands == other.bands
    }
}
