//! Scalar voxel volumes built from image stacks.
//!
//! Samples are normalized to [0, 1] at ingest and stored x-fastest:
//! `index = x + nx * (y + ny * z)`. Slice `k` of a stack becomes the plane
//! `z = k`.

mod diffusion;
mod stack;
mod stats;

pub use diffusion::anisotropic_diffusion;
pub use stack::{load_stack, load_stack_dir, Raster, RasterData};
pub use stats::{intensity_stats, IntensityStats};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::math::Vec3;

#[derive(Debug, thiserror::Error)]
pub enum VolumeError {
    #[error("image stack is empty")]
    EmptyStack,
    #[error("slice {index} ({name}) is {found:?}, expected {expected:?}")]
    DimensionMismatch {
        index: usize,
        name: String,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("unsupported pixel format in slice {index} ({name}): {format}")]
    UnsupportedPixelFormat {
        index: usize,
        name: String,
        format: String,
    },
    #[error("slice {index}: {message}")]
    CorruptRaster { index: usize, message: String },
    #[error("slice index {index} out of range (depth {depth})")]
    IndexOutOfRange { index: usize, depth: usize },
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("invalid volume: {0}")]
    Invalid(String),
    #[error("stack directory not found: {0}")]
    RootNotFound(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
}

impl VolumeError {
    /// Stable variant name for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            VolumeError::EmptyStack => "EmptyStack",
            VolumeError::DimensionMismatch { .. } => "DimensionMismatch",
            VolumeError::UnsupportedPixelFormat { .. } => "UnsupportedPixelFormat",
            VolumeError::CorruptRaster { .. } => "CorruptRaster",
            VolumeError::IndexOutOfRange { .. } => "IndexOutOfRange",
            VolumeError::ParameterOutOfRange(_) => "ParameterOutOfRange",
            VolumeError::Invalid(_) => "Invalid",
            VolumeError::RootNotFound(_) => "RootNotFound",
            VolumeError::Io { .. } => "Io",
            VolumeError::Decode { .. } => "Decode",
        }
    }
}

pub type Result<T> = std::result::Result<T, VolumeError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<f64>,
}

impl Volume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(VolumeError::Invalid(format!("dimensions {dims:?} must be positive")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(VolumeError::Invalid(format!("spacing {spacing:?} must be positive")));
        }
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| VolumeError::Invalid("volume too large".into()))?;
        if data.len() != n {
            return Err(VolumeError::Invalid(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                dims[0],
                dims[1],
                dims[2]
            )));
        }
        if let Some(i) = data.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(VolumeError::Invalid(format!(
                "sample {i} = {} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self { dims, spacing, data })
    }

    /// Fills a volume from a function of voxel coordinates; results are
    /// clamped into [0, 1].
    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.iter().product());
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let s = f(x, y, z);
                    data.push(if s.is_nan() { 0.0 } else { s.clamp(0.0, 1.0) });
                }
            }
        }
        Self::new(dims, spacing, data)
    }

    pub fn constant(dims: [usize; 3], value: f64) -> Result<Self> {
        Self::from_fn(dims, [1.0; 3], |_, _, _| value)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(VolumeError::Invalid(format!("spacing {spacing:?} must be positive")));
        }
        self.spacing = spacing;
        Ok(self)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Physical volume of one voxel.
    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let plane = self.dims[0] * self.dims[1];
        [i % self.dims[0], (i / self.dims[0]) % self.dims[1], i / plane]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(x, y, z)]
    }

    /// Physical position of a voxel center, `(i + 0.5) * spacing`.
    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        Vec3::new(
            (x as f64 + 0.5) * self.spacing[0],
            (y as f64 + 0.5) * self.spacing[1],
            (z as f64 + 0.5) * self.spacing[2],
        )
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// One z-plane of a volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice2D {
    pub width: usize,
    pub height: usize,
    pub index: usize,
    pub data: Vec<f64>,
}

impl Slice2D {
    /// Quantizes to 8-bit gray, row-major.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&s| (s.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }
}

/// Copies the plane `z = index`.
pub fn get_slice(v: &Volume, index: usize) -> Result<Slice2D> {
    let [nx, ny, nz] = v.dims;
    if index >= nz {
        return Err(VolumeError::IndexOutOfRange { index, depth: nz });
    }
    let plane = nx * ny;
    Ok(Slice2D {
        width: nx,
        height: ny,
        index,
        data: v.data[index * plane..(index + 1) * plane].to_vec(),
    })
}
