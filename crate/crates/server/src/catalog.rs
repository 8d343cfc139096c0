use std::path::{Path, PathBuf};

use ascribe_core::volume::{load_stack_dir, Volume};
use ascribe_core::Mesh;
use ascribe_session::{parse_mesh_asset, AssetEntry, AssetError, AssetKind, AssetSource};
use walkdir::WalkDir;

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("asset root not found: {0}")]
    RootNotFound(PathBuf),
    #[error("cannot scan {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CatalogError {
    pub fn kind(&self) -> &'static str {
        match self {
            CatalogError::RootNotFound(_) => "RootNotFound",
            CatalogError::Io { .. } => "Io",
        }
    }
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

fn relative_name(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Recursively catalogs `root`.
///
/// `*.obj` and `*.stl` files are mesh assets. A directory below the root that
/// holds at least one `*.png` and no subdirectories is an image stack whose
/// size is the sum of its PNG files. Entries are sorted by name.
pub fn scan_assets(root: &Path) -> Result<Vec<AssetEntry>, CatalogError> {
    if !root.is_dir() {
        return Err(CatalogError::RootNotFound(root.to_path_buf()));
    }
    let mut out = Vec::new();
    for entry in WalkDir::new(root).min_depth(1).sort_by_file_name() {
        let entry = entry.map_err(|e| CatalogError::Io {
            path: e.path().unwrap_or(root).to_path_buf(),
            message: e.to_string(),
        })?;
        let path = entry.path();
        let file_type = entry.file_type();
        if file_type.is_file() {
            let kind = if has_ext(path, "obj") {
                AssetKind::MeshObj
            } else if has_ext(path, "stl") {
                AssetKind::MeshStl
            } else {
                continue;
            };
            let size = entry.metadata().map(|m| m.len()).unwrap_or(0);
            out.push(AssetEntry {
                name: relative_name(root, path),
                kind,
                size,
                slice_count: None,
            });
        } else if file_type.is_dir() {
            if let Some(stack) = stack_entry(root, path)? {
                out.push(stack);
            }
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

fn stack_entry(root: &Path, dir: &Path) -> Result<Option<AssetEntry>, CatalogError> {
    let io = |e: std::io::Error| CatalogError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    };
    let (mut slices, mut size) = (0usize, 0u64);
    for child in std::fs::read_dir(dir).map_err(io)? {
        let child = child.map_err(io)?;
        let ty = child.file_type().map_err(io)?;
        if ty.is_dir() {
            return Ok(None);
        }
        if ty.is_file() && has_ext(&child.path(), "png") {
            slices += 1;
            size += child.metadata().map_err(io)?.len();
        }
    }
    Ok((slices > 0).then(|| AssetEntry {
        name: relative_name(root, dir),
        kind: AssetKind::ImageStack,
        size,
        slice_count: Some(slices),
    }))
}

/// Asset source backed by a directory tree. Only cataloged names resolve, so
/// clients cannot reach files outside the root.
#[derive(Debug, Clone)]
pub struct FsAssets {
    root: PathBuf,
}

impl FsAssets {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, CatalogError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(CatalogError::RootNotFound(root));
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lookup(&self, name: &str, want: impl Fn(AssetKind) -> bool) -> Result<AssetEntry, AssetError> {
        self.catalog()
            .into_iter()
            .find(|e| e.name == name && want(e.kind))
            .ok_or_else(|| AssetError::NotFound(name.to_string()))
    }
}

impl AssetSource for FsAssets {
    fn catalog(&self) -> Vec<AssetEntry> {
        scan_assets(&self.root).unwrap_or_else(|e| {
            log::warn!("asset scan failed: {e}");
            Vec::new()
        })
    }

    fn load_mesh(&self, name: &str) -> Result<Mesh, AssetError> {
        let entry = self.lookup(name, |k| k != AssetKind::ImageStack)?;
        let bytes = std::fs::read(self.root.join(&entry.name))
            .map_err(|e| AssetError::Invalid(format!("{name}: {e}")))?;
        parse_mesh_asset(entry.kind, &bytes)
    }

    fn load_stack(&self, name: &str) -> Result<Volume, AssetError> {
        let entry = self.lookup(name, |k| k == AssetKind::ImageStack)?;
        load_stack_dir(&self.root.join(&entry.name))
            .map_err(|e| AssetError::Invalid(format!("{}: {e}", e.kind())))
    }
}
