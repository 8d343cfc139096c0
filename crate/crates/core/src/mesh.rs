//! Indexed triangle meshes with named parts, and surface materials.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::math::Vec3;

/// A named, contiguous range of triangles `[start, end)` in the parent mesh.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshPart {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

impl MeshPart {
    pub fn new(name: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            name: name.into(),
            start,
            end,
        }
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub triangles: Vec<[u32; 3]>,
    pub parts: Vec<MeshPart>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: u32,
        count: usize,
    },
    #[error("normal count {normals} does not match vertex count {vertices}")]
    NormalCount { normals: usize, vertices: usize },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("mesh parts do not tile the triangle list: {0}")]
    BadParts(String),
}

impl Mesh {
    /// Builds a mesh whose single part covers every triangle.
    pub fn from_triangles(
        name: impl Into<String>,
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
    ) -> Self {
        let parts = if triangles.is_empty() {
            Vec::new()
        } else {
            vec![MeshPart::new(name, 0, triangles.len())]
        };
        Self {
            vertices,
            normals: None,
            triangles,
            parts,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_positions(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Checks index bounds, normal count, finiteness and part tiling.
    ///
    /// An empty mesh has no parts; otherwise parts must be non-empty,
    /// ordered, and cover `0..triangles.len()` without gaps.
    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(MeshError::NonFinite(i));
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(MeshError::NormalCount {
                    normals: normals.len(),
                    vertices: n,
                });
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            for &index in tri {
                if index as usize >= n {
                    return Err(MeshError::IndexOutOfRange {
                        triangle: t,
                        index,
                        count: n,
                    });
                }
            }
        }
        let mut cursor = 0;
        for p in &self.parts {
            if p.start != cursor {
                return Err(MeshError::BadParts(format!(
                    "part '{}' starts at {} but previous part ended at {}",
                    p.name, p.start, cursor
                )));
            }
            if p.end <= p.start {
                return Err(MeshError::BadParts(format!("part '{}' is empty", p.name)));
            }
            cursor = p.end;
        }
        if cursor != self.triangles.len() {
            return Err(MeshError::BadParts(format!(
                "parts cover {} of {} triangles",
                cursor,
                self.triangles.len()
            )));
        }
        Ok(())
    }

    /// Axis-aligned bounds of the referenced vertices, `None` when empty.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.vertices.iter();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))))
    }

    /// Bounds of the vertices used by triangles `range`.
    pub fn part_bounds(&self, range: Range<usize>) -> Option<(Vec3, Vec3)> {
        let mut out: Option<(Vec3, Vec3)> = None;
        for tri in &self.triangles[range] {
            for &i in tri {
                let v = self.vertices[i as usize];
                out = Some(match out {
                    None => (v, v),
                    Some((lo, hi)) => (lo.min(v), hi.max(v)),
                });
            }
        }
        out
    }

    /// Copies the triangles of one part into a standalone mesh with
    /// compacted vertex indices.
    pub fn extract_part(&self, part: usize) -> Mesh {
        let p = &self.parts[part];
        let mut remap: HashMap<u32, u32> = HashMap::new();
        let mut vertices = Vec::new();
        let mut normals = self.normals.as_ref().map(|_| Vec::new());
        let mut triangles = Vec::with_capacity(p.len());
        for tri in &self.triangles[p.range()] {
            let mapped = tri.map(|i| {
                *remap.entry(i).or_insert_with(|| {
                    vertices.push(self.vertices[i as usize]);
                    if let (Some(out), Some(src)) = (normals.as_mut(), self.normals.as_ref()) {
                        out.push(src[i as usize]);
                    }
                    (vertices.len() - 1) as u32
                })
            });
            triangles.push(mapped);
        }
        Mesh {
            vertices,
            normals,
            parts: vec![MeshPart::new(p.name.clone(), 0, triangles.len())],
            triangles,
        }
    }

    /// Returns a copy with every vertex mapped through `f`; normals dropped.
    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            normals: None,
            triangles: self.triangles.clone(),
            parts: self.parts.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialPreset {
    #[default]
    Default,
    Glass,
    Brick,
}

/// Glass is always see-through; opacities above this are capped.
pub const GLASS_MAX_OPACITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub preset: MaterialPreset,
    pub opacity: f64,
    pub base_color: [f64; 3],
}

impl Default for Material {
    fn default() -> Self {
        Self::from_preset(MaterialPreset::Default)
    }
}

impl MaterialPreset {
    pub fn base_color(self) -> [f64; 3] {
        match self {
            MaterialPreset::Default => [0.8, 0.8, 0.8],
            MaterialPreset::Glass => [0.75, 0.88, 0.95],
            MaterialPreset::Brick => [0.62, 0.27, 0.18],
        }
    }
}

impl Material {
    pub fn from_preset(preset: MaterialPreset) -> Self {
        Self::new(preset, 1.0)
    }

    /// Opacity is clamped to [0, 1] (NaN becomes 1) and Glass is capped at
    /// [`GLASS_MAX_OPACITY`].
    pub fn new(preset: MaterialPreset, opacity: f64) -> Self {
        Self {
            preset,
            opacity: clamp_opacity(preset, opacity),
            base_color: preset.base_color(),
        }
    }

    pub fn with_opacity(self, opacity: f64) -> Self {
        Self {
            opacity: clamp_opacity(self.preset, opacity),
            ..self
        }
    }
}

fn clamp_opacity(preset: MaterialPreset, opacity: f64) -> f64 {
    let o = if opacity.is_nan() {
        1.0
    } else {
        opacity.clamp(0.0, 1.0)
    };
    match preset {
        MaterialPreset::Glass => o.min(GLASS_MAX_OPACITY),
        _ => o,
    }
}
