//! Experiment orchestration: configuration, seeding, parameter search,
//! the four experiment drivers and result persistence.

mod config;
mod dataset;
mod experiments;
mod grid;
mod results;
mod seeds;

pub use config::{BetaScale, EpsilonScale, ExperimentConfig, ExperimentKind, FilterConfig};
pub use dataset::{load_macaque, DatasetCheck, MACAQUE_EDGES, MACAQUE_NODES};
pub use experiments::{
    run_convergence, run_dataset_denoise, run_experiment, run_noisy_templates, run_subgraph_prior,
    spectral_gap_samples, ExperimentOutput, TuningRecord,
};
pub use grid::{grid_search, pick, GridPoint};
pub use results::{
    emit_results, find_cell, read_results_csv, sort_results, summarize, write_results_csv, CellKey, CellSummary,
    Method, SignalCount, TrialResult, TrialStatus, CSV_COLUMNS,
};
pub use seeds::{derive_seed, Stream};
