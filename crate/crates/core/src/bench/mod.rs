//! Scenario execution, metrics, heatmaps and ablations.

mod ablation;
mod heatmap;
mod scenario;

use std::path::PathBuf;

pub use ablation::{ablation_matrix, AblationReport, PairedDiff, Variant};
pub use heatmap::{emit_heatmap, heatmap_csv, heatmap_ppm, visit_dispersion};
pub use scenario::{
    mean_ci95, run_scenario, MetricsReport, ScenarioRun, ScenarioSpec, SeedMetrics, SolverKind, DEFAULT_EPISODE_LENGTH,
};

use crate::maps::MapError;
use crate::solver::SolverError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("scenario: {0}")]
    Spec(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },
    #[error(transparent)]
    Run(#[from] SolverError),
}
