//! Operator-facing pieces of the collaborative scene server: the on-disk
//! asset catalog, the batch segmentation pipeline and the network front end.

pub mod catalog;
pub mod pipeline;
pub mod server;

pub use catalog::{scan_assets, CatalogError, FsAssets};
pub use pipeline::{
    run_in_memory, run_pipeline, ExportFormat, PipelineConfig, PipelineError, PipelineReport,
};
pub use server::{Hub, ServeError, ServeOptions, Server};
