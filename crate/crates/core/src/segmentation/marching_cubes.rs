use std::collections::HashMap;

use super::tables::{EDGE_TABLE, TRI_TABLE};
use super::{Result, SegmentationError};
use crate::math::Vec3;
use crate::mesh::Mesh;
use crate::volume::Volume;

/// Corner offsets in table order.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Corner pairs joined by each cube edge.
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Extracts the `iso` level set of `v` as a welded triangle mesh.
///
/// Samples sit at voxel centers `(i + 0.5) * spacing`. Edge vertices are
/// linearly interpolated and shared between neighboring cells, so a closed
/// surface comes out watertight. Triangles wind counter-clockwise seen from
/// the low-valued side, i.e. normals point from values above `iso` toward
/// values below it.
pub fn marching_cubes(v: &Volume, iso: f64) -> Result<Mesh> {
    let dims = v.dims();
    if dims.iter().any(|&d| d < 2) {
        return Err(SegmentationError::DegenerateVolume(dims));
    }
    if !(iso > 0.0 && iso < 1.0) {
        return Err(SegmentationError::ParameterOutOfRange(format!(
            "isovalue must be in (0, 1), got {iso}"
        )));
    }
    let [nx, ny, nz] = dims;
    let spacing = v.spacing();
    let position = |p: [f64; 3]| {
        Vec3::new(
            (p[0] + 0.5) * spacing[0],
            (p[1] + 0.5) * spacing[1],
            (p[2] + 0.5) * spacing[2],
        )
    };

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    // key: (linear index of the edge's lower corner) * 3 + axis
    let mut welded: HashMap<usize, u32> = HashMap::new();

    for z in 0..nz - 1 {
        for y in 0..ny - 1 {
            for x in 0..nx - 1 {
                let mut values = [0.0; 8];
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    values[c] = v.get(x + off[0], y + off[1], z + off[2]);
                    if values[c] < iso {
                        case |= 1 << c;
                    }
                }
                let crossed = EDGE_TABLE[case];
                if crossed == 0 {
                    continue;
                }
                let mut edge_vertex = [u32::MAX; 12];
                for (e, &[a, b]) in EDGES.iter().enumerate() {
                    if crossed & (1 << e) == 0 {
                        continue;
                    }
                    // orient every edge from its lower to its upper corner so
                    // both cells sharing it compute the identical point
                    let (lo, hi) = if CORNERS[a] < CORNERS[b] { (a, b) } else { (b, a) };
                    let base = [x + CORNERS[lo][0], y + CORNERS[lo][1], z + CORNERS[lo][2]];
                    let axis = (0..3).find(|&k| CORNERS[lo][k] != CORNERS[hi][k]).unwrap();
                    let key = (base[0] + nx * (base[1] + ny * base[2])) * 3 + axis;
                    edge_vertex[e] = *welded.entry(key).or_insert_with(|| {
                        let (v0, v1) = (values[lo], values[hi]);
                        let t = (iso - v0) / (v1 - v0);
                        let mut p = base.map(|c| c as f64);
                        p[axis] += t;
                        vertices.push(position(p));
                        (vertices.len() - 1) as u32
                    });
                }
                for tri in TRI_TABLE[case].chunks_exact(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    triangles.push([tri[0], tri[1], tri[2]].map(|e| edge_vertex[e as usize]));
                }
            }
        }
    }

    Ok(Mesh::from_triangles("isosurface", vertices, triangles))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signed_volume(m: &Mesh) -> f64 {
        (0..m.triangle_count())
            .map(|t| {
                let [a, b, c] = m.triangle_positions(t);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }

    #[test]
    fn uniform_volumes_are_empty() {
        for value in [0.0, 1.0] {
            let v = Volume::constant([4, 4, 4], value).unwrap();
            assert!(marching_cubes(&v, 0.5).unwrap().is_empty());
        }
    }

    #[test]
    fn single_voxel_gives_octahedron() {
        let v = Volume::from_fn([3, 3, 3], [1.0; 3], |x, y, z| {
            if (x, y, z) == (1, 1, 1) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let m = marching_cubes(&v, 0.5).unwrap();
        assert_eq!(m.vertex_count(), 6);
        assert_eq!(m.triangle_count(), 8);
        // outward orientation: positive enclosed volume
        assert!(signed_volume(&m) > 0.0);
        m.validate().unwrap();
    }

    #[test]
    fn spacing_scales_vertices() {
        let v = Volume::from_fn([3, 3, 3], [2.0, 1.0, 0.5], |x, y, z| {
            if (x, y, z) == (1, 1, 1) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let m = marching_cubes(&v, 0.5).unwrap();
        let (lo, hi) = m.bounds().unwrap();
        assert_eq!(lo, Vec3::new(2.0, 1.0, 0.5));
        assert_eq!(hi, Vec3::new(4.0, 2.0, 1.0));
    }

    #[test]
    fn degenerate_and_bad_iso() {
        let v = Volume::constant([1, 4, 4], 0.0).unwrap();
        assert_eq!(
            marching_cubes(&v, 0.5),
            Err(SegmentationError::DegenerateVolume([1, 4, 4]))
        );
        let v = Volume::constant([2, 2, 2], 0.0).unwrap();
        assert!(marching_cubes(&v, 0.0).is_err());
        assert!(marching_cubes(&v, 1.0).is_err());
    }

    #[test]
    fn no_triangle_repeats_an_index() {
        let v = Volume::from_fn([6, 6, 6], [1.0; 3], |x, y, z| ((x * 31 + y * 17 + z * 7) % 11) as f64 / 10.0)
            .unwrap();
        let m = marching_cubes(&v, 0.45).unwrap();
        assert!(!m.is_empty());
        assert!(m.triangles.iter().all(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2]));
    }
}
