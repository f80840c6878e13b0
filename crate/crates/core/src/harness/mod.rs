//! Experiment configuration, training loops, sweeps and report files.

mod bound_suite;
mod checkpoint;
mod config;
mod diag;
mod noise;
mod report;
mod run;
mod sweep;

pub use bound_suite::{random_bound_cases, BoundCase, BoundRow};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use config::{DatasetSource, ExperimentConfig};
pub use diag::{diagnose, emit_diag, DiagReport};
pub use noise::{accuracy_table, noise_config, noise_robustness_suite, NoiseCell, NOISE_LEVELS, NOISE_LOOKSAM_K};
pub use report::{emit_reports, run_stem, write_csv_rows, write_json, EmitOutcome, SummaryRow};
pub use run::{
    prepare_data, run_experiment, run_experiment_with_params, EpochRecord, PreparedData, RunRecord,
    THIN_ABOVE, THIN_STRIDE,
};
pub use sweep::{best_by_validation, lambda_grid, rho_alpha_grid, sweep, MeanStd, RunFailure, SweepCell, LAMBDA_VALUES};
