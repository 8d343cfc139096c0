use std::fmt::Write as _;

use super::{MeshIoError, Result};
use crate::math::Vec3;
use crate::mesh::{Mesh, MeshPart};

const DEFAULT_PART: &str = "default";

/// Counts of records the OBJ reader skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObjReport {
    pub texture_coords: usize,
    pub material_statements: usize,
    pub other: usize,
}

impl ObjReport {
    pub fn warnings(&self) -> usize {
        self.texture_coords + self.material_statements + self.other
    }
}

pub fn parse_obj(text: &str) -> Result<Mesh> {
    parse_obj_with_report(text).map(|(m, _)| m)
}

/// Parses OBJ text. Faces with more than three corners are fan-triangulated
/// about their first corner; every `o` or `g` line opens a new part.
pub fn parse_obj_with_report(text: &str) -> Result<(Mesh, ObjReport)> {
    let mut report = ObjReport::default();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut file_normals: Vec<Vec3> = Vec::new();
    let mut vertex_normals: Vec<Option<u32>> = Vec::new();
    let mut any_face_normal = false;
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    // (name, first triangle)
    let mut part_starts: Vec<(String, usize)> = vec![(DEFAULT_PART.to_string(), 0)];
    let mut corners: Vec<(u32, Option<u32>)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("");
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        match keyword {
            "v" => {
                let p = parse_vec3(&mut tokens, line_no)?;
                vertices.push(p);
                vertex_normals.push(None);
            }
            "vn" => file_normals.push(parse_vec3(&mut tokens, line_no)?),
            "f" => {
                corners.clear();
                for tok in tokens {
                    corners.push(parse_corner(tok, line_no, vertices.len(), file_normals.len())?);
                }
                if corners.len() < 3 {
                    return Err(MeshIoError::SyntaxError {
                        line: line_no,
                        message: format!("face needs at least 3 vertices, got {}", corners.len()),
                    });
                }
                for &(v, n) in &corners {
                    if let Some(n) = n {
                        vertex_normals[v as usize] = Some(n);
                        any_face_normal = true;
                    }
                }
                let first = corners[0].0;
                for w in corners[1..].windows(2) {
                    triangles.push([first, w[0].0, w[1].0]);
                }
            }
            "o" | "g" => {
                let name: Vec<&str> = tokens.collect();
                let name = if name.is_empty() {
                    DEFAULT_PART.to_string()
                } else {
                    name.join(" ")
                };
                match part_starts.last_mut() {
                    Some(last) if last.1 == triangles.len() => last.0 = name,
                    _ => part_starts.push((name, triangles.len())),
                }
            }
            "vt" => report.texture_coords += 1,
            "usemtl" | "mtllib" => report.material_statements += 1,
            _ => report.other += 1,
        }
    }

    if vertices.len() > u32::MAX as usize {
        return Err(MeshIoError::TooLarge);
    }

    let mut parts = Vec::with_capacity(part_starts.len());
    for (i, (name, start)) in part_starts.iter().enumerate() {
        let end = part_starts
            .get(i + 1)
            .map_or(triangles.len(), |next| next.1);
        if end > *start {
            parts.push(MeshPart::new(name.clone(), *start, end));
        }
    }

    let normals = if any_face_normal {
        Some(
            vertex_normals
                .iter()
                .map(|n| n.map_or(Vec3::ZERO, |i| file_normals[i as usize]))
                .collect(),
        )
    } else if !file_normals.is_empty() && file_normals.len() == vertices.len() {
        Some(file_normals)
    } else {
        None
    };

    if report.warnings() > 0 {
        log::debug!("obj: skipped {} unsupported records", report.warnings());
    }

    Ok((
        Mesh {
            vertices,
            normals,
            triangles,
            parts,
        },
        report,
    ))
}

fn parse_vec3<'a>(tokens: &mut impl Iterator<Item = &'a str>, line: usize) -> Result<Vec3> {
    let mut c = [0.0; 3];
    for slot in &mut c {
        let tok = tokens.next().ok_or_else(|| MeshIoError::SyntaxError {
            line,
            message: "expected 3 coordinates".into(),
        })?;
        let v: f64 = tok.parse().map_err(|_| MeshIoError::SyntaxError {
            line,
            message: format!("invalid number '{tok}'"),
        })?;
        if !v.is_finite() {
            return Err(MeshIoError::SyntaxError {
                line,
                message: format!("non-finite number '{tok}'"),
            });
        }
        *slot = v;
    }
    Ok(Vec3::from(c))
}

/// Parses `v`, `v/vt`, `v//vn` or `v/vt/vn`, resolving 1-based and negative
/// (relative) indices to zero-based ones.
fn parse_corner(
    tok: &str,
    line: usize,
    vertex_count: usize,
    normal_count: usize,
) -> Result<(u32, Option<u32>)> {
    let mut fields = tok.split('/');
    let v = resolve_index(fields.next().unwrap_or(""), line, vertex_count, "vertex")?;
    let _texture = fields.next();
    let n = match fields.next() {
        Some(f) if !f.is_empty() => Some(resolve_index(f, line, normal_count, "normal")?),
        _ => None,
    };
    Ok((v, n))
}

fn resolve_index(field: &str, line: usize, count: usize, what: &str) -> Result<u32> {
    let raw: i64 = field.parse().map_err(|_| MeshIoError::SyntaxError {
        line,
        message: format!("invalid {what} index '{field}'"),
    })?;
    let resolved = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        count as i64 + raw
    } else {
        -1
    };
    if resolved < 0 || resolved >= count as i64 {
        return Err(MeshIoError::IndexError {
            line,
            message: format!("{what} index {raw} with {count} {what}s defined"),
        });
    }
    Ok(resolved as u32)
}

/// Writes all vertices (and normals) first, then one `o` block per part.
pub fn write_obj(mesh: &Mesh) -> String {
    let mut out = String::with_capacity(32 * (mesh.vertices.len() + mesh.triangles.len()) + 64);
    out.push_str("# ascribe mesh export\n");
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    if let Some(normals) = &mesh.normals {
        for n in normals {
            let _ = writeln!(out, "vn {} {} {}", n.x, n.y, n.z);
        }
    }
    let with_normals = mesh.normals.is_some();
    let write_faces = |out: &mut String, tris: &[[u32; 3]]| {
        for t in tris {
            let [a, b, c] = t.map(|i| i + 1);
            let _ = if with_normals {
                writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}")
            } else {
                writeln!(out, "f {a} {b} {c}")
            };
        }
    };
    if mesh.parts.is_empty() {
        if !mesh.triangles.is_empty() {
            out.push_str("o default\n");
            write_faces(&mut out, &mesh.triangles);
        }
    } else {
        for p in &mesh.parts {
            let _ = writeln!(out, "o {}", p.name);
            write_faces(&mut out, &mesh.triangles[p.range()]);
        }
    }
    out
}
