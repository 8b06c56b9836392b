//! Evaluation, experiment orchestration, and reporting.

pub mod config;
mod matrix;
mod metrics;
mod report;

pub use config::ExperimentConfig;
pub use matrix::{matrix_cells, prepare_seed, run_cell, run_cells, run_matrix, seed_dir, CellSpec, SeedArtifacts};
pub use metrics::{cer, edit_distance, evaluate, evaluate_detailed, Evaluation, UtteranceScore, EVAL_BEAM};
pub use report::{
    count_best_markers, emit_report, median, read_results, BaselineResult, CellResult, ResultsTable, RESULTS_CSV,
    RESULTS_MD,
};
