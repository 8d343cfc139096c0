use std::collections::BTreeMap;

use ascribe_core::mesh_io;
use ascribe_core::volume::Volume;
use ascribe_core::Mesh;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AssetKind {
    MeshObj,
    MeshStl,
    ImageStack,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetEntry {
    /// Path relative to the asset root, `/`-separated.
    pub name: String,
    pub kind: AssetKind,
    pub size: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssetError {
    #[error("asset not found: {0}")]
    NotFound(String),
    #[error("{0}")]
    Invalid(String),
}

/// Parses mesh bytes with the parser the asset kind calls for.
pub fn parse_mesh_asset(kind: AssetKind, bytes: &[u8]) -> Result<Mesh, AssetError> {
    let parsed = match kind {
        AssetKind::MeshObj => {
            let text = std::str::from_utf8(bytes)
                .map_err(|_| AssetError::Invalid("OBJ file is not UTF-8".into()))?;
            mesh_io::parse_obj(text)
        }
        AssetKind::MeshStl => mesh_io::parse_stl(bytes),
        AssetKind::ImageStack => return Err(AssetError::Invalid("not a mesh asset".into())),
    };
    parsed.map_err(|e| AssetError::Invalid(format!("{}: {e}", e.kind())))
}

/// Where a session gets importable content from.
pub trait AssetSource {
    fn catalog(&self) -> Vec<AssetEntry>;
    fn load_mesh(&self, name: &str) -> Result<Mesh, AssetError>;
    fn load_stack(&self, name: &str) -> Result<Volume, AssetError>;
}

/// In-memory assets, handy for tests and simulations.
#[derive(Debug, Clone, Default)]
pub struct MemoryAssets {
    meshes: BTreeMap<String, (AssetKind, Vec<u8>)>,
    stacks: BTreeMap<String, Volume>,
}

impl MemoryAssets {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a mesh file; the kind follows the name's extension.
    pub fn with_mesh_file(mut self, name: &str, bytes: Vec<u8>) -> Self {
        let kind = if name.to_ascii_lowercase().ends_with(".obj") {
            AssetKind::MeshObj
        } else {
            AssetKind::MeshStl
        };
        self.meshes.insert(name.to_string(), (kind, bytes));
        self
    }

    pub fn with_stack(mut self, name: &str, v: Volume) -> Self {
        self.stacks.insert(name.to_string(), v);
        self
    }
}

impl AssetSource for MemoryAssets {
    fn catalog(&self) -> Vec<AssetEntry> {
        let mut out: Vec<AssetEntry> = self
            .meshes
            .iter()
            .map(|(name, (kind, bytes))| AssetEntry {
                name: name.clone(),
                kind: *kind,
                size: bytes.len() as u64,
                slice_count: None,
            })
            .chain(self.stacks.iter().map(|(name, v)| AssetEntry {
                name: name.clone(),
                kind: AssetKind::ImageStack,
                size: (v.len() * 8) as u64,
                slice_count: Some(v.dims()[2]),
            }))
            .collect();
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out
    }

    fn load_mesh(&self, name: &str) -> Result<Mesh, AssetError> {
        let (kind, bytes) = self
            .meshes
            .get(name)
            .ok_or_else(|| AssetError::NotFound(name.to_string()))?;
        parse_mesh_asset(*kind, bytes)
    }

    fn load_stack(&self, name: &str) -> Result<Volume, AssetError> {
        self.stacks
            .get(name)
            .cloned()
            .ok_or_else(|| AssetError::NotFound(name.to_string()))
    }
}
