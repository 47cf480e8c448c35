//! File formats: rasters, soft-prediction grids, manifests and reports.

pub mod grid;
pub mod manifest;
pub mod raster;
pub mod report;

pub use grid::{load_grid, save_grid, Grid};
pub use manifest::{DatasetManifest, ManifestEntry};
pub use raster::{load_frame, load_mask, save_mask};
pub use report::{EvaluationReport, ImageRow, Provenance};
