//! Volumes of interest: thresholding, connected-component labeling,
//! isosurface extraction and Laplacian smoothing of the resulting meshes.

mod marching_cubes;
mod smoothing;
mod tables;

pub use marching_cubes::marching_cubes;
pub use smoothing::laplacian_smooth;

use serde::{Deserialize, Serialize};

use crate::volume::Volume;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SegmentationError {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("volume dimensions {0:?} too small for marching cubes (need >= 2 per axis)")]
    DegenerateVolume([usize; 3]),
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch([usize; 3], [usize; 3]),
}

impl SegmentationError {
    pub fn kind(&self) -> &'static str {
        match self {
            SegmentationError::ParameterOutOfRange(_) => "ParameterOutOfRange",
            SegmentationError::DegenerateVolume(_) => "DegenerateVolume",
            SegmentationError::DimensionMismatch(..) => "DimensionMismatch",
        }
    }
}

pub type Result<T> = std::result::Result<T, SegmentationError>;

/// Boolean voxel mask sharing the layout and spacing of its source volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMask {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<bool>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), data.len());
        Self {
            dims,
            spacing,
            data,
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[x + self.dims[0] * (y + self.dims[1] * z)]
    }

    /// Renders the mask as a 0/1 volume for isosurfacing at 0.5.
    pub fn to_volume(&self) -> Volume {
        Volume::new(
            self.dims,
            self.spacing,
            self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .expect("mask dimensions are valid")
    }
}

/// Closed-interval threshold: a voxel is set iff `lo <= sample <= hi`.
pub fn threshold(v: &Volume, lo: f64, hi: f64) -> Result<BinaryMask> {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(SegmentationError::ParameterOutOfRange(format!(
            "threshold needs 0 <= lo <= hi <= 1, got lo={lo} hi={hi}"
        )));
    }
    Ok(BinaryMask::new(
        v.dims(),
        v.spacing(),
        v.data().iter().map(|&s| lo <= s && s <= hi).collect(),
    ))
}

/// Integer labels per voxel; 0 is background and components are numbered
/// `1..=count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMask {
    pub dims: [usize; 3],
    pub labels: Vec<u32>,
    pub count: u32,
}

impl LabelMask {
    /// The voxels carrying `label`, as a mask with the given spacing.
    pub fn select(&self, label: u32, spacing: [f64; 3]) -> BinaryMask {
        BinaryMask::new(
            self.dims,
            spacing,
            self.labels.iter().map(|&l| l == label).collect(),
        )
    }

    /// Voxel count per label, index 0 being background.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count as usize + 1];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let grand = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = grand;
            a = grand;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// 6-connected component labeling. Labels follow first-encounter order of an
/// x-fastest scan, so the result is deterministic.
pub fn connected_components(mask: &BinaryMask) -> LabelMask {
    let [nx, ny, _] = mask.dims;
    let plane = nx * ny;
    let mut provisional = vec![u32::MAX; mask.data.len()];
    let mut sets = DisjointSet::new();

    // first pass: provisional labels, merging with already-visited neighbors
    for (i, &set) in mask.data.iter().enumerate() {
        if !set {
            continue;
        }
        let x = i % nx;
        let y = (i / nx) % ny;
        let z = i / plane;
        let mut label = u32::MAX;
        let behind = [
            (x > 0).then(|| i - 1),
            (y > 0).then(|| i - nx),
            (z > 0).then(|| i - plane),
        ];
        for j in behind.into_iter().flatten() {
            let lj = provisional[j];
            if lj == u32::MAX {
                continue;
            }
            if label == u32::MAX {
                label = lj;
            } else {
                sets.union(label, lj);
            }
        }
        if label == u32::MAX {
            label = sets.make();
        }
        provisional[i] = label;
    }

    // second pass: dense labels in scan order of first appearance
    let mut dense = vec![0u32; sets.parent.len()];
    let mut count = 0u32;
    let mut labels = vec![0u32; mask.data.len()];
    for (i, &p) in provisional.iter().enumerate() {
        if p == u32::MAX {
            continue;
        }
        let root = sets.find(p) as usize;
        if dense[root] == 0 {
            count += 1;
            dense[root] = count;
        }
        labels[i] = dense[root];
    }

    LabelMask {
        dims: mask.dims,
        labels,
        count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(dims: [usize; 3], set: &[[usize; 3]]) -> BinaryMask {
        let mut data = vec![false; dims.iter().product()];
        for &[x, y, z] in set {
            data[x + dims[0] * (y + dims[1] * z)] = true;
        }
        BinaryMask::new(dims, [1.0; 3], data)
    }

    #[test]
    fn full_range_threshold_sets_everything() {
        let v = Volume::from_fn([3, 3, 3], [1.0; 3], |x, y, z| (x + y + z) as f64 / 6.0).unwrap();
        assert_eq!(threshold(&v, 0.0, 1.0).unwrap().count(), 27);
    }

    #[test]
    fn threshold_is_closed() {
        let v = Volume::new([2, 1, 1], [1.0; 3], vec![0.5, 0.4]).unwrap();
        assert_eq!(threshold(&v, 0.5, 0.5).unwrap().data, vec![true, false]);
    }

    #[test]
    fn threshold_rejects_bad_bounds() {
        let v = Volume::constant([1, 1, 1], 0.0).unwrap();
        assert!(threshold(&v, 0.6, 0.4).is_err());
        assert!(threshold(&v, -0.1, 0.4).is_err());
        assert!(threshold(&v, 0.1, 1.1).is_err());
    }

    #[test]
    fn face_neighbors_join() {
        let l = connected_components(&mask([3, 3, 3], &[[1, 1, 1], [1, 1, 2]]));
        assert_eq!(l.count, 1);
    }

    #[test]
    fn diagonal_neighbors_stay_apart() {
        let l = connected_components(&mask([3, 3, 3], &[[0, 0, 0], [1, 1, 0]]));
        assert_eq!(l.count, 2);
        let l = connected_components(&mask([3, 3, 3], &[[0, 0, 0], [1, 1, 1]]));
        assert_eq!(l.count, 2);
    }

    #[test]
    fn labels_follow_scan_order() {
        // a U shape whose arms are discovered before they merge
        let l = connected_components(&mask(
            [3, 2, 1],
            &[[0, 0, 0], [2, 0, 0], [0, 1, 0], [1, 1, 0], [2, 1, 0]],
        ));
        assert_eq!(l.count, 1);
        let l = connected_components(&mask([4, 1, 1], &[[3, 0, 0], [0, 0, 0], [1, 0, 0]]));
        assert_eq!(l.labels, vec![1, 1, 0, 2]);
        assert_eq!(l.sizes(), vec![1, 2, 1]);
    }

    #[test]
    fn empty_mask_has_no_components() {
        let l = connected_components(&mask([2, 2, 2], &[]));
        assert_eq!(l.count, 0);
        assert!(l.labels.iter().all(|&v| v == 0));
    }
}
