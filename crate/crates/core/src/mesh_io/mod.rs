//! Reading and writing Wavefront OBJ and STL (binary and ASCII) meshes.
//!
//! OBJ support covers `v`, `vn`, `f`, `o`, `g` and comments. Texture
//! coordinates, smoothing groups and material statements are skipped and
//! counted. STL vertices are welded by exact bit equality.

mod obj;
mod stl;

pub use obj::{parse_obj, parse_obj_with_report, write_obj, ObjReport};
pub use stl::{parse_stl, write_stl_ascii, write_stl_binary};

use serde::{Deserialize, Serialize};

use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeshFormat {
    ObjText,
    StlBinary,
    StlAscii,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshIoError {
    #[error("unrecognized mesh format")]
    UnknownFormat,
    #[error("syntax error on line {line}: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("face index out of range on line {line}: {message}")]
    IndexError { line: usize, message: String },
    #[error("truncated STL: expected {expected} bytes, found {actual}")]
    TruncatedFile { expected: u64, actual: u64 },
    #[error("non-finite coordinate in triangle {0}")]
    NonFinite(usize),
    #[error("too many vertices for 32-bit indices")]
    TooLarge,
}

impl MeshIoError {
    /// Stable variant name for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            MeshIoError::UnknownFormat => "UnknownFormat",
            MeshIoError::SyntaxError { .. } => "SyntaxError",
            MeshIoError::IndexError { .. } => "IndexError",
            MeshIoError::TruncatedFile { .. } => "TruncatedFile",
            MeshIoError::NonFinite(_) => "NonFinite",
            MeshIoError::TooLarge => "TooLarge",
        }
    }
}

pub type Result<T> = std::result::Result<T, MeshIoError>;

pub(crate) const STL_HEADER_LEN: usize = 80;
pub(crate) const STL_RECORD_LEN: usize = 50;

/// Classifies a byte stream.
///
/// ASCII STL wins when the data starts with the token `solid` and contains
/// `facet`; otherwise a length of exactly `84 + 50n` (with `n` read at offset
/// 80) means binary STL; otherwise any line starting with `v ` means OBJ.
pub fn detect_format(bytes: &[u8]) -> Result<MeshFormat> {
    if bytes.len() < 6 {
        return Err(MeshIoError::UnknownFormat);
    }
    if looks_like_ascii_stl(bytes) {
        return Ok(MeshFormat::StlAscii);
    }
    if let Some(n) = stl_triangle_count(bytes) {
        let expected = 84u64 + STL_RECORD_LEN as u64 * n as u64;
        if bytes.len() as u64 == expected {
            return Ok(MeshFormat::StlBinary);
        }
    }
    if bytes
        .split(|&b| b == b'\n')
        .any(|line| trim_ascii_start(line).starts_with(b"v ") || trim_ascii_start(line).starts_with(b"v\t"))
    {
        return Ok(MeshFormat::ObjText);
    }
    Err(MeshIoError::UnknownFormat)
}

/// Parses any supported format, detecting it first.
pub fn parse_mesh(bytes: &[u8]) -> Result<Mesh> {
    match detect_format(bytes)? {
        MeshFormat::ObjText => {
            let text = std::str::from_utf8(bytes).map_err(|e| MeshIoError::SyntaxError {
                line: line_of_offset(bytes, e.valid_up_to()),
                message: "invalid UTF-8".into(),
            })?;
            parse_obj(text)
        }
        MeshFormat::StlBinary | MeshFormat::StlAscii => parse_stl(bytes),
    }
}

/// Serializes a mesh in the requested format.
pub fn write_mesh(mesh: &Mesh, format: MeshFormat) -> Vec<u8> {
    match format {
        MeshFormat::ObjText => write_obj(mesh).into_bytes(),
        MeshFormat::StlBinary => write_stl_binary(mesh),
        MeshFormat::StlAscii => write_stl_ascii(mesh).into_bytes(),
    }
}

pub(crate) fn stl_triangle_count(bytes: &[u8]) -> Option<u32> {
    let raw = bytes.get(STL_HEADER_LEN..STL_HEADER_LEN + 4)?;
    Some(u32::from_le_bytes(raw.try_into().ok()?))
}

pub(crate) fn looks_like_ascii_stl(bytes: &[u8]) -> bool {
    let head = trim_ascii_start(bytes);
    let starts = head.starts_with(b"solid")
        && head
            .get(5)
            .is_none_or(|b| b.is_ascii_whitespace());
    starts && contains(bytes, b"facet") && bytes.is_ascii()
}

fn trim_ascii_start(b: &[u8]) -> &[u8] {
    let skip = b.iter().take_while(|c| c.is_ascii_whitespace()).count();
    &b[skip..]
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}

fn line_of_offset(bytes: &[u8], offset: usize) -> usize {
    bytes[..offset].iter().filter(|&&b| b == b'\n').count() + 1
}
