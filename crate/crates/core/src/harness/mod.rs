//! Experiment configuration, provenance manifests and the commands behind the CLI.

pub mod behavior;
pub mod commands;
pub mod config;
pub mod eval;
pub mod manifest;

pub use behavior::{accepted_gap, accepted_gaps, fit_start_params, walking_speeds, PositionSource, SpeedSummary, StartFit};
pub use commands::{
    cmd_compare_behavior, cmd_evaluate, cmd_rank_features, cmd_simulate, cmd_train_gap, cmd_tune_noise, max_abs_diff,
    CompareOutput, EvaluateOutput, RankOutput, SimulateOutput, TrainOutput, TrainRow, TuneOutput,
};
pub use config::{exit_code, ExperimentConfig, OUTPUT_DIR_ENV};
pub use eval::{
    compare_predictors, horizon_steps, is_wait_then_cross, noise_grid_search, prediction_errors, tracking_rmse, walk_away_segment,
    ErrorComparison, HorizonErrors, NoiseGridPoint, RolloutScope,
};
pub use manifest::{sha256_file, sha256_hex, Manifest, ManifestBuilder, MANIFEST_FILE};
