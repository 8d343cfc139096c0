use std::collections::HashMap;
use std::fmt::Write as _;

use super::{looks_like_ascii_stl, stl_triangle_count, MeshIoError, Result, STL_HEADER_LEN, STL_RECORD_LEN};
use crate::math::Vec3;
use crate::mesh::{Mesh, MeshPart};

const DEFAULT_PART: &str = "default";

/// Parses binary or ASCII STL. Corner positions are welded into shared
/// vertices when their single-precision bit patterns are identical.
pub fn parse_stl(bytes: &[u8]) -> Result<Mesh> {
    if looks_like_ascii_stl(bytes) {
        let text = std::str::from_utf8(bytes).map_err(|_| MeshIoError::SyntaxError {
            line: 1,
            message: "invalid UTF-8".into(),
        })?;
        parse_ascii(text)
    } else {
        parse_binary(bytes)
    }
}

/// Welds corners by exact bit equality.
#[derive(Default)]
struct Welder {
    index: HashMap<[u32; 3], u32>,
    vertices: Vec<Vec3>,
}

impl Welder {
    fn push(&mut self, p: [f32; 3]) -> Result<u32> {
        let key = p.map(f32::to_bits);
        if let Some(&i) = self.index.get(&key) {
            return Ok(i);
        }
        let i = u32::try_from(self.vertices.len()).map_err(|_| MeshIoError::TooLarge)?;
        self.vertices
            .push(Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64));
        self.index.insert(key, i);
        Ok(i)
    }
}

fn parse_binary(bytes: &[u8]) -> Result<Mesh> {
    let min = (STL_HEADER_LEN + 4) as u64;
    let Some(n) = stl_triangle_count(bytes) else {
        return Err(MeshIoError::TruncatedFile {
            expected: min,
            actual: bytes.len() as u64,
        });
    };
    let expected = min + STL_RECORD_LEN as u64 * n as u64;
    if bytes.len() as u64 != expected {
        return Err(MeshIoError::TruncatedFile {
            expected,
            actual: bytes.len() as u64,
        });
    }

    let mut welder = Welder::default();
    let mut triangles = Vec::with_capacity(n as usize);
    let body = &bytes[STL_HEADER_LEN + 4..];
    for (t, record) in body.chunks_exact(STL_RECORD_LEN).enumerate() {
        let f = |k: usize| f32::from_le_bytes(record[4 * k..4 * k + 4].try_into().unwrap());
        // floats 0..3 are the facet normal, recomputed on write
        let mut tri = [0u32; 3];
        for (c, slot) in tri.iter_mut().enumerate() {
            let p = [f(3 + 3 * c), f(4 + 3 * c), f(5 + 3 * c)];
            if !p.iter().all(|v| v.is_finite()) {
                return Err(MeshIoError::NonFinite(t));
            }
            *slot = welder.push(p)?;
        }
        triangles.push(tri);
    }

    let name = header_name(&bytes[..STL_HEADER_LEN]);
    Ok(Mesh::from_triangles(name, welder.vertices, triangles))
}

fn header_name(header: &[u8]) -> String {
    let end = header.iter().position(|&b| b == 0).unwrap_or(header.len());
    let raw = &header[..end];
    if !raw.iter().all(|b| b.is_ascii_graphic() || *b == b' ') {
        return DEFAULT_PART.to_string();
    }
    let text = String::from_utf8_lossy(raw);
    let text = text.trim();
    let text = match text.strip_prefix("solid") {
        Some(rest) if rest.is_empty() || rest.starts_with(' ') => rest.trim(),
        _ => text,
    };
    if text.is_empty() {
        DEFAULT_PART.to_string()
    } else {
        text.to_string()
    }
}

struct Tokens<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t))),
        );
        Self {
            inner: it.peekable(),
            last_line: 1,
        }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let t = self.inner.next()?;
        self.last_line = t.0;
        Some(t)
    }

    fn skip_line(&mut self, line: usize) {
        while self.inner.next_if(|t| t.0 == line).is_some() {}
    }

    fn expect(&mut self, word: &str) -> Result<usize> {
        match self.next() {
            Some((line, t)) if t.eq_ignore_ascii_case(word) => Ok(line),
            Some((line, t)) => Err(syntax(line, format!("expected '{word}', found '{t}'"))),
            None => Err(syntax(self.last_line, format!("expected '{word}', found end of file"))),
        }
    }

    fn float(&mut self) -> Result<f32> {
        let (line, t) = self
            .next()
            .ok_or_else(|| syntax(self.last_line, "expected a number".into()))?;
        let v: f32 = t
            .parse()
            .map_err(|_| syntax(line, format!("invalid number '{t}'")))?;
        if !v.is_finite() {
            return Err(syntax(line, format!("non-finite number '{t}'")));
        }
        Ok(v)
    }
}

fn syntax(line: usize, message: String) -> MeshIoError {
    MeshIoError::SyntaxError { line, message }
}

/// ASCII STL; each `solid ... endsolid` block becomes one part.
fn parse_ascii(text: &str) -> Result<Mesh> {
    let mut welder = Welder::default();
    let mut triangles = Vec::new();
    let mut parts = Vec::new();
    // solid names run to the end of their line
    let lines: Vec<&str> = text.lines().collect();
    let mut tokens = Tokens::new(text);

    while let Some((line, word)) = tokens.next() {
        if !word.eq_ignore_ascii_case("solid") {
            return Err(syntax(line, format!("expected 'solid', found '{word}'")));
        }
        let name = lines[line - 1]
            .split_whitespace()
            .skip(1)
            .collect::<Vec<_>>()
            .join(" ");
        let name = if name.is_empty() {
            DEFAULT_PART.to_string()
        } else {
            name
        };
        tokens.skip_line(line);
        let start = triangles.len();
        loop {
            let Some((line, word)) = tokens.next() else {
                // tolerate a missing endsolid at end of file
                break;
            };
            if word.eq_ignore_ascii_case("endsolid") {
                tokens.skip_line(line);
                break;
            }
            if !word.eq_ignore_ascii_case("facet") {
                return Err(syntax(line, format!("expected 'facet', found '{word}'")));
            }
            tokens.expect("normal")?;
            for _ in 0..3 {
                tokens.float()?;
            }
            tokens.expect("outer")?;
            tokens.expect("loop")?;
            let mut tri = [0u32; 3];
            for slot in &mut tri {
                tokens.expect("vertex")?;
                let p = [tokens.float()?, tokens.float()?, tokens.float()?];
                *slot = welder.push(p)?;
            }
            tokens.expect("endloop")?;
            tokens.expect("endfacet")?;
            triangles.push(tri);
        }
        if triangles.len() > start {
            parts.push(MeshPart::new(name, start, triangles.len()));
        }
    }

    Ok(Mesh {
        vertices: welder.vertices,
        normals: None,
        triangles,
        parts,
    })
}

fn facet_normal(p: [Vec3; 3]) -> [f32; 3] {
    let n = (p[1] - p[0]).cross(p[2] - p[0]);
    let n = n.normalized().unwrap_or(Vec3::ZERO);
    [n.x as f32, n.y as f32, n.z as f32]
}

fn first_part_name(mesh: &Mesh) -> &str {
    mesh.parts.first().map_or(DEFAULT_PART, |p| p.name.as_str())
}

/// Little-endian binary STL, `84 + 50n` bytes. The first part's name goes in
/// the header; coordinates are narrowed to single precision.
pub fn write_stl_binary(mesh: &Mesh) -> Vec<u8> {
    let n = mesh.triangles.len();
    let mut out = Vec::with_capacity(STL_HEADER_LEN + 4 + STL_RECORD_LEN * n);
    let mut header = [0u8; STL_HEADER_LEN];
    let name: Vec<u8> = first_part_name(mesh)
        .bytes()
        .filter(|b| b.is_ascii_graphic() || *b == b' ')
        .take(STL_HEADER_LEN)
        .collect();
    header[..name.len()].copy_from_slice(&name);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for t in 0..n {
        let p = mesh.triangle_positions(t);
        for v in facet_normal(p) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in p {
            for c in [v.x, v.y, v.z] {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

/// ASCII STL with one `solid` block per part.
pub fn write_stl_ascii(mesh: &Mesh) -> String {
    let mut out = String::new();
    let mut write_solid = |name: &str, range: std::ops::Range<usize>| {
        let name = name.replace(['\n', '\r'], " ");
        let _ = writeln!(out, "solid {name}");
        for t in range {
            let p = mesh.triangle_positions(t);
            let [nx, ny, nz] = facet_normal(p);
            let _ = writeln!(out, "  facet normal {nx:e} {ny:e} {nz:e}");
            out.push_str("    outer loop\n");
            for v in p {
                let _ = writeln!(
                    out,
                    "      vertex {:e} {:e} {:e}",
                    v.x as f32, v.y as f32, v.z as f32
                );
            }
            out.push_str("    endloop\n  endfacet\n");
        }
        let _ = writeln!(out, "endsolid {name}");
    };
    if mesh.parts.is_empty() {
        write_solid(first_part_name(mesh), 0..mesh.triangles.len());
    } else {
        for p in &mesh.parts {
            write_solid(&p.name, p.range());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_io::{detect_format, MeshFormat};

    fn one_triangle() -> Mesh {
        Mesh::from_triangles("tri", vec![Vec3::ZERO, Vec3::X, Vec3::Y], vec![[0, 1, 2]])
    }

    #[test]
    fn binary_single_triangle() {
        let bytes = write_stl_binary(&one_triangle());
        assert_eq!(bytes.len(), 134);
        let m = parse_stl(&bytes).unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.triangles.len(), 1);
        assert_eq!(m.parts[0].name, "tri");
    }

    #[test]
    fn zero_triangle_file_is_empty_mesh() {
        let bytes = write_stl_binary(&Mesh::default());
        assert_eq!(bytes.len(), 84);
        let m = parse_stl(&bytes).unwrap();
        assert!(m.is_empty());
        assert!(m.vertices.is_empty());
        assert!(m.parts.is_empty());
    }

    #[test]
    fn length_mismatch_is_truncation() {
        let mut bytes = write_stl_binary(&one_triangle());
        bytes.pop();
        assert_eq!(
            parse_stl(&bytes),
            Err(MeshIoError::TruncatedFile {
                expected: 134,
                actual: 133
            })
        );
        assert!(matches!(
            parse_stl(&[0u8; 40]),
            Err(MeshIoError::TruncatedFile { .. })
        ));
    }

    #[test]
    fn nan_coordinates_are_rejected() {
        let mut bytes = write_stl_binary(&one_triangle());
        bytes[84 + 12..84 + 16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(parse_stl(&bytes), Err(MeshIoError::NonFinite(0)));
    }

    #[test]
    fn unnamed_header_defaults() {
        let mut bytes = write_stl_binary(&one_triangle());
        bytes[..80].fill(0xff);
        assert_eq!(parse_stl(&bytes).unwrap().parts[0].name, "default");
    }

    #[test]
    fn ascii_round_trip_keeps_parts() {
        let mut m = Mesh {
            vertices: vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::new(0.5, 0.25, 3.0)],
            normals: None,
            triangles: vec![[0, 1, 2], [1, 3, 2]],
            parts: vec![MeshPart::new("left", 0, 1), MeshPart::new("right part", 1, 2)],
        };
        let text = write_stl_ascii(&m);
        assert_eq!(detect_format(text.as_bytes()).unwrap(), MeshFormat::StlAscii);
        let back = parse_stl(text.as_bytes()).unwrap();
        m.normals = None;
        assert_eq!(back, m);
    }

    #[test]
    fn ascii_syntax_errors_carry_lines() {
        let text = "solid s\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 q 0\n";
        assert!(matches!(
            parse_stl(text.as_bytes()),
            Err(MeshIoError::SyntaxError { line: 5, .. })
        ));
    }

    #[test]
    fn ascii_without_name_or_endsolid() {
        let text = "solid\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\n\
                    vertex 0 1 0\nendloop\nendfacet\n";
        let m = parse_stl(text.as_bytes()).unwrap();
        assert_eq!(m.triangles.len(), 1);
        assert_eq!(m.parts[0].name, "default");
    }
}
