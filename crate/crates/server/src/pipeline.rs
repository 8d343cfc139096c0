use std::path::{Path, PathBuf};

use ascribe_core::mesh_io::{write_mesh, MeshFormat};
use ascribe_core::quantify::{mesh_report, voi_reports, MeshReport, QuantifyError, VoiReport};
use ascribe_core::segmentation::{
    connected_components, laplacian_smooth, marching_cubes, threshold, LabelMask,
    SegmentationError,
};
use ascribe_core::volume::{anisotropic_diffusion, load_stack_dir, Volume, VolumeError};
use ascribe_core::{Mesh, MeshPart, Vec3};
use serde::{Deserialize, Serialize};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionParams {
    pub iterations: usize,
    pub kappa: f64,
    pub lambda: f64,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            iterations: 5,
            kappa: 0.1,
            lambda: 0.125,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdParams {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        Self { lo: 0.5, hi: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothParams {
    pub iterations: usize,
    pub lambda: f64,
}

impl Default for SmoothParams {
    fn default() -> Self {
        Self {
            iterations: 10,
            lambda: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    #[default]
    Stl,
    Obj,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Stl => "stl",
            ExportFormat::Obj => "obj",
        }
    }

    fn mesh_format(self) -> MeshFormat {
        match self {
            ExportFormat::Stl => MeshFormat::StlBinary,
            ExportFormat::Obj => MeshFormat::ObjText,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportParams {
    pub format: ExportFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub stack_dir: PathBuf,
    #[serde(default)]
    pub diffusion: DiffusionParams,
    #[serde(default)]
    pub threshold: ThresholdParams,
    #[serde(default)]
    pub smooth: SmoothParams,
    #[serde(default)]
    pub export: ExportParams,
}

impl PipelineConfig {
    pub fn new(stack_dir: impl Into<PathBuf>) -> Self {
        Self {
            stack_dir: stack_dir.into(),
            diffusion: DiffusionParams::default(),
            threshold: ThresholdParams::default(),
            smooth: SmoothParams::default(),
            export: ExportParams::default(),
        }
    }

    /// Reads a JSON config. A relative `stack_dir` is taken relative to the
    /// config file's directory.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::ConfigRead {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        if cfg.stack_dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.stack_dir = parent.join(&cfg.stack_dir);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("cannot read config {path}: {message}")]
    ConfigRead { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Quantify(#[from] QuantifyError),
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl PipelineError {
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::ConfigRead { .. } => "ConfigRead",
            PipelineError::Config(_) => "ConfigInvalid",
            PipelineError::Volume(e) => e.kind(),
            PipelineError::Segmentation(e) => e.kind(),
            PipelineError::Quantify(QuantifyError::UnknownLabel { .. }) => "UnknownLabel",
            PipelineError::Quantify(QuantifyError::DimensionMismatch { .. }) => {
                "DimensionMismatch"
            }
            PipelineError::Output { .. } => "OutputError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub label: u32,
    /// Exported mesh file name, relative to the output directory.
    pub file: String,
    pub voi: VoiReport,
    pub mesh: MeshReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub diffusion: DiffusionParams,
    pub threshold: ThresholdParams,
    pub smooth: SmoothParams,
    pub format: ExportFormat,
    pub component_count: u32,
    pub components: Vec<ComponentReport>,
}

/// Output of [`run_in_memory`]: the report plus every exported file.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: PipelineReport,
    pub meshes: Vec<Mesh>,
    pub files: Vec<(String, Vec<u8>)>,
}

/// Voxel index bounds (inclusive) of every label, index 0 unused.
fn label_bounds(labels: &LabelMask) -> Vec<Option<([usize; 3], [usize; 3])>> {
    let [nx, ny, _] = labels.dims;
    let mut bounds: Vec<Option<([usize; 3], [usize; 3])>> = vec![None; labels.count as usize + 1];
    for (i, &l) in labels.labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let p = [i % nx, (i / nx) % ny, i / (nx * ny)];
        let b = bounds[l as usize].get_or_insert((p, p));
        for a in 0..3 {
            b.0[a] = b.0[a].min(p[a]);
            b.1[a] = b.1[a].max(p[a]);
        }
    }
    bounds
}

/// Isosurface of one component, extracted from its bounding box padded by a
/// layer of background so the surface always closes. Coordinates match the
/// full volume's voxel-center convention.
fn component_mesh(
    labels: &LabelMask,
    label: u32,
    (lo, hi): ([usize; 3], [usize; 3]),
    spacing: [f64; 3],
) -> Result<Mesh, PipelineError> {
    let [nx, ny, _] = labels.dims;
    let sub = [hi[0] - lo[0] + 3, hi[1] - lo[1] + 3, hi[2] - lo[2] + 3];
    let v = Volume::from_fn(sub, spacing, |x, y, z| {
        let inside = (1..sub[0] - 1).contains(&x)
            && (1..sub[1] - 1).contains(&y)
            && (1..sub[2] - 1).contains(&z)
            && {
                let (gx, gy, gz) = (lo[0] + x - 1, lo[1] + y - 1, lo[2] + z - 1);
                labels.labels[gx + nx * (gy + ny * gz)] == label
            };
        if inside { 1.0 } else { 0.0 }
    })?;
    let shift = Vec3::new(
        (lo[0] as f64 - 1.0) * spacing[0],
        (lo[1] as f64 - 1.0) * spacing[1],
        (lo[2] as f64 - 1.0) * spacing[2],
    );
    let mut mesh = marching_cubes(&v, 0.5)?.map_vertices(|p| p + shift);
    mesh.parts = if mesh.triangles.is_empty() {
        Vec::new()
    } else {
        vec![MeshPart::new(format!("voi_{label:03}"), 0, mesh.triangles.len())]
    };
    Ok(mesh)
}

/// Runs filter, segment, mesh, smooth and quantify without touching the
/// file system beyond reading the stack.
pub fn run_in_memory(cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let raw = load_stack_dir(&cfg.stack_dir)?;
    process_volume(cfg, &raw)
}

/// Same as [`run_in_memory`] for an already loaded volume.
pub fn process_volume(cfg: &PipelineConfig, raw: &Volume) -> Result<PipelineOutput, PipelineError> {
    let d = &cfg.diffusion;
    let filtered = anisotropic_diffusion(raw, d.iterations, d.kappa, d.lambda)?;
    let mask = threshold(&filtered, cfg.threshold.lo, cfg.threshold.hi)?;
    let labels = connected_components(&mask);
    log::info!("{} component(s)", labels.count);
    let vois = voi_reports(&labels, raw)?;
    let bounds = label_bounds(&labels);
    let spacing = raw.spacing();

    let mut components = Vec::with_capacity(vois.len());
    let mut meshes = Vec::with_capacity(vois.len());
    let mut files = Vec::with_capacity(vois.len());
    for voi in vois {
        let label = voi.label;
        let b = bounds[label as usize].expect("every label has voxels");
        let mesh = component_mesh(&labels, label, b, spacing)?;
        let mesh = laplacian_smooth(&mesh, cfg.smooth.iterations, cfg.smooth.lambda)?;
        let file = format!("voi_{label:03}.{}", cfg.export.format.extension());
        files.push((file.clone(), write_mesh(&mesh, cfg.export.format.mesh_format())));
        components.push(ComponentReport {
            label,
            file,
            voi,
            mesh: mesh_report(&mesh),
        });
        meshes.push(mesh);
    }
    let report = PipelineReport {
        dims: raw.dims(),
        spacing,
        diffusion: cfg.diffusion.clone(),
        threshold: cfg.threshold.clone(),
        smooth: cfg.smooth.clone(),
        format: cfg.export.format,
        component_count: labels.count,
        components,
    };
    Ok(PipelineOutput {
        report,
        meshes,
        files,
    })
}

/// Runs the pipeline and writes one mesh per component plus `report.json`
/// into `out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig, out_dir: &Path) -> Result<PipelineReport, PipelineError> {
    let output = run_in_memory(cfg)?;
    let write = |name: &str, bytes: &[u8]| {
        let path = out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| PipelineError::Output {
            path,
            message: e.to_string(),
        })
    };
    std::fs::create_dir_all(out_dir).map_err(|e| PipelineError::Output {
        path: out_dir.to_path_buf(),
        message: e.to_string(),
    })?;
    for (name, bytes) in &output.files {
        write(name, bytes)?;
    }
    let mut json = serde_json::to_string_pretty(&output.report)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    json.push('\n');
    write(REPORT_FILE, json.as_bytes())?;
    Ok(output.report)
}
