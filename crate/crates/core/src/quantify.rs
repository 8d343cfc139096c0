//! Shape, morphology and intensity metrics for labeled VOIs and meshes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::math::Vec3;
use crate::mesh::Mesh;
use crate::segmentation::LabelMask;
use crate::volume::Volume;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuantifyError {
    #[error("unknown label {label} (mask has {count} components)")]
    UnknownLabel { label: u32, count: u32 },
    #[error("label dims {labels:?} do not match volume dims {volume:?}")]
    DimensionMismatch {
        labels: [usize; 3],
        volume: [usize; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiReport {
    pub label: u32,
    pub voxel_count: u64,
    /// `voxel_count` times the volume of one voxel.
    pub physical_volume: f64,
    /// Mean of voxel centers `(i + 0.5) * spacing`.
    pub centroid: Vec3,
    /// Outer faces of the extreme voxels.
    pub bbox_min: Vec3,
    pub bbox_max: Vec3,
    pub mean_intensity: f64,
    /// Population standard deviation.
    pub std_intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshReport {
    pub surface_area: f64,
    /// Present only for watertight meshes.
    pub enclosed_volume: Option<f64>,
    pub watertight: bool,
    pub triangle_count: usize,
    pub vertex_count: usize,
}

#[derive(Clone)]
struct Accumulator {
    count: u64,
    index_sum: [u64; 3],
    lo: [usize; 3],
    hi: [usize; 3],
    mean: f64,
    m2: f64,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            count: 0,
            index_sum: [0; 3],
            lo: [usize::MAX; 3],
            hi: [0; 3],
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn add(&mut self, c: [usize; 3], sample: f64) {
        self.count += 1;
        for k in 0..3 {
            self.index_sum[k] += c[k] as u64;
            self.lo[k] = self.lo[k].min(c[k]);
            self.hi[k] = self.hi[k].max(c[k]);
        }
        let delta = sample - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (sample - self.mean);
    }

    fn finish(&self, label: u32, spacing: [f64; 3]) -> VoiReport {
        let n = self.count as f64;
        let center = |k: usize| (self.index_sum[k] as f64 / n + 0.5) * spacing[k];
        VoiReport {
            label,
            voxel_count: self.count,
            physical_volume: n * spacing.iter().product::<f64>(),
            centroid: Vec3::new(center(0), center(1), center(2)),
            bbox_min: Vec3::new(
                self.lo[0] as f64 * spacing[0],
                self.lo[1] as f64 * spacing[1],
                self.lo[2] as f64 * spacing[2],
            ),
            bbox_max: Vec3::new(
                (self.hi[0] + 1) as f64 * spacing[0],
                (self.hi[1] + 1) as f64 * spacing[1],
                (self.hi[2] + 1) as f64 * spacing[2],
            ),
            mean_intensity: self.mean,
            std_intensity: (self.m2 / n).max(0.0).sqrt(),
        }
    }
}

fn check_dims(labels: &LabelMask, v: &Volume) -> Result<(), QuantifyError> {
    if labels.dims != v.dims() {
        return Err(QuantifyError::DimensionMismatch {
            labels: labels.dims,
            volume: v.dims(),
        });
    }
    Ok(())
}

/// Metrics for one label, intensities taken from `v`.
pub fn voi_report(labels: &LabelMask, v: &Volume, label: u32) -> Result<VoiReport, QuantifyError> {
    check_dims(labels, v)?;
    if label == 0 || label > labels.count {
        return Err(QuantifyError::UnknownLabel {
            label,
            count: labels.count,
        });
    }
    let mut acc = Accumulator::new();
    for (i, &l) in labels.labels.iter().enumerate() {
        if l == label {
            acc.add(v.coords(i), v.data()[i]);
        }
    }
    if acc.count == 0 {
        return Err(QuantifyError::UnknownLabel {
            label,
            count: labels.count,
        });
    }
    Ok(acc.finish(label, v.spacing()))
}

/// Reports for every label `1..=count` in a single pass.
pub fn voi_reports(labels: &LabelMask, v: &Volume) -> Result<Vec<VoiReport>, QuantifyError> {
    check_dims(labels, v)?;
    let mut accs = vec![Accumulator::new(); labels.count as usize + 1];
    for (i, &l) in labels.labels.iter().enumerate() {
        if l != 0 {
            accs[l as usize].add(v.coords(i), v.data()[i]);
        }
    }
    Ok(accs
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, a)| a.count > 0)
        .map(|(l, a)| a.finish(l as u32, v.spacing()))
        .collect())
}

/// True when the mesh has triangles and every undirected edge borders
/// exactly two of them.
pub fn is_watertight(m: &Mesh) -> bool {
    if m.triangles.is_empty() {
        return false;
    }
    let mut counts: HashMap<(u32, u32), u32> = HashMap::with_capacity(m.triangles.len() * 3 / 2);
    for t in &m.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *counts.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    counts.values().all(|&c| c == 2)
}

/// Surface area, and enclosed volume via the divergence theorem when the
/// mesh is closed. The volume is an absolute value so inverted windings
/// still report a positive volume.
pub fn mesh_report(m: &Mesh) -> MeshReport {
    let mut area = 0.0;
    let mut signed = 0.0;
    for t in 0..m.triangles.len() {
        let [a, b, c] = m.triangle_positions(t);
        area += 0.5 * (b - a).cross(c - a).norm();
        signed += a.dot(b.cross(c)) / 6.0;
    }
    let watertight = is_watertight(m);
    MeshReport {
        surface_area: area,
        enclosed_volume: watertight.then_some(signed.abs()),
        watertight,
        triangle_count: m.triangles.len(),
        vertex_count: m.vertices.len(),
    }
}
