use super::{Result, SegmentationError};
use crate::math::Vec3;
use crate::mesh::Mesh;

/// Vertex adjacency in compressed rows, neighbors sorted ascending.
struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    pinned: Vec<bool>,
}

impl Adjacency {
    fn build(mesh: &Mesh) -> Self {
        let n = mesh.vertices.len();
        let mut edges: Vec<(u32, u32)> = Vec::with_capacity(mesh.triangles.len() * 3);
        for t in &mesh.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if a != b {
                    edges.push((a.min(b), a.max(b)));
                }
            }
        }
        edges.sort_unstable();

        // an edge used by exactly one triangle is a boundary edge
        let mut pinned = vec![false; n];
        let mut unique: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j] == edges[i] {
                j += 1;
            }
            let (a, b) = edges[i];
            if j - i == 1 {
                pinned[a as usize] = true;
                pinned[b as usize] = true;
            }
            unique.push((a, b));
            i = j;
        }

        let mut directed: Vec<(u32, u32)> = unique
            .iter()
            .flat_map(|&(a, b)| [(a, b), (b, a)])
            .collect();
        directed.sort_unstable();
        let mut offsets = vec![0usize; n + 1];
        for &(a, _) in &directed {
            offsets[a as usize + 1] += 1;
        }
        for k in 0..n {
            offsets[k + 1] += offsets[k];
        }
        let neighbors = directed.into_iter().map(|(_, b)| b).collect();
        for (v, p) in pinned.iter_mut().enumerate() {
            if offsets[v + 1] == offsets[v] {
                *p = true;
            }
        }
        Self {
            offsets,
            neighbors,
            pinned,
        }
    }

    fn of(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Uniform-weight Laplacian smoothing: `iterations` synchronous steps of
/// `v += lambda * (mean(neighbors) - v)`. Isolated vertices and vertices on
/// boundary edges stay fixed; connectivity is untouched.
pub fn laplacian_smooth(mesh: &Mesh, iterations: usize, lambda: f64) -> Result<Mesh> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(SegmentationError::ParameterOutOfRange(format!(
            "lambda must be in (0, 1], got {lambda}"
        )));
    }
    let mut out = mesh.clone();
    if iterations == 0 || mesh.vertices.is_empty() {
        return Ok(out);
    }
    let adj = Adjacency::build(mesh);
    let mut current = mesh.vertices.clone();
    let mut next = current.clone();
    for _ in 0..iterations {
        for (v, slot) in next.iter_mut().enumerate() {
            let p = current[v];
            if adj.pinned[v] {
                *slot = p;
                continue;
            }
            let ring = adj.of(v);
            let mut sum = Vec3::ZERO;
            for &u in ring {
                sum += current[u as usize];
            }
            let mean = sum / ring.len() as f64;
            *slot = p + (mean - p) * lambda;
        }
        std::mem::swap(&mut current, &mut next);
    }
    out.vertices = current;
    // stale after moving vertices
    out.normals = None;
    Ok(out)
}
