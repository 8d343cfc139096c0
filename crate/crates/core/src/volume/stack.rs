use std::path::Path;

use image::DynamicImage;

use super::{Result, Volume, VolumeError};

#[derive(Debug, Clone, PartialEq)]
pub enum RasterData {
    Gray8(Vec<u8>),
    Gray16(Vec<u16>),
}

/// A single-channel 2D image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub data: RasterData,
}

impl Raster {
    pub fn gray8(name: impl Into<String>, width: u32, height: u32, data: Vec<u8>) -> Self {
        Self {
            name: name.into(),
            width,
            height,
            data: RasterData::Gray8(data),
        }
    }

    pub fn gray16(name: impl Into<String>, width: u32, height: u32, data: Vec<u16>) -> Self {
        Self {
            name: name.into(),
            width,
            height,
            data: RasterData::Gray16(data),
        }
    }

    fn sample_count(&self) -> usize {
        match &self.data {
            RasterData::Gray8(d) => d.len(),
            RasterData::Gray16(d) => d.len(),
        }
    }

    fn push_normalized(&self, out: &mut Vec<f64>) {
        match &self.data {
            RasterData::Gray8(d) => out.extend(d.iter().map(|&p| p as f64 / u8::MAX as f64)),
            RasterData::Gray16(d) => out.extend(d.iter().map(|&p| p as f64 / u16::MAX as f64)),
        }
    }

    fn from_image(index: usize, name: String, img: DynamicImage) -> Result<Self> {
        let (width, height) = (img.width(), img.height());
        match img {
            DynamicImage::ImageLuma8(b) => Ok(Self::gray8(name, width, height, b.into_raw())),
            DynamicImage::ImageLuma16(b) => Ok(Self::gray16(name, width, height, b.into_raw())),
            other => Err(VolumeError::UnsupportedPixelFormat {
                index,
                name,
                format: format!("{:?}", other.color()),
            }),
        }
    }
}

/// Stacks equally sized rasters into a unit-spacing volume; slice `k`
/// becomes `z = k` and samples are divided by the bit-depth maximum.
pub fn load_stack(images: &[Raster]) -> Result<Volume> {
    let first = images.first().ok_or(VolumeError::EmptyStack)?;
    let (w, h) = (first.width, first.height);
    let plane = w as usize * h as usize;
    let mut data = Vec::with_capacity(plane * images.len());
    for (index, img) in images.iter().enumerate() {
        if (img.width, img.height) != (w, h) {
            return Err(VolumeError::DimensionMismatch {
                index,
                name: img.name.clone(),
                expected: (w, h),
                found: (img.width, img.height),
            });
        }
        if img.sample_count() != plane {
            return Err(VolumeError::CorruptRaster {
                index,
                message: format!("{} samples for {}x{}", img.sample_count(), w, h),
            });
        }
        img.push_normalized(&mut data);
    }
    Volume::new([w as usize, h as usize, images.len()], [1.0; 3], data)
}

/// Loads every `*.png` in `dir` (not recursive), ordered lexicographically by
/// file name. Accepts 8- and 16-bit grayscale only.
pub fn load_stack_dir(dir: &Path) -> Result<Volume> {
    if !dir.is_dir() {
        return Err(VolumeError::RootNotFound(dir.to_path_buf()));
    }
    let io_err = |source| VolumeError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if files.is_empty() {
        return Err(VolumeError::EmptyStack);
    }

    let mut rasters = Vec::with_capacity(files.len());
    for (index, path) in files.iter().enumerate() {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let img = image::ImageReader::open(path)
            .map_err(|source| VolumeError::Io {
                path: path.clone(),
                source,
            })?
            .with_guessed_format()
            .map_err(|source| VolumeError::Io {
                path: path.clone(),
                source,
            })?
            .decode()
            .map_err(|e| VolumeError::Decode {
                path: path.clone(),
                message: e.to_string(),
            })?;
        rasters.push(Raster::from_image(index, name, img)?);
    }
    log::debug!("loaded {} slices from {}", rasters.len(), dir.display());
    load_stack(&rasters)
}
