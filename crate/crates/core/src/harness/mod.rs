//! Experiment orchestration: synthetic data, sweeps over sparsity patterns,
//! rank surveys and the command-line front end.

pub mod cli;
mod config;
mod data;
mod sweep;

pub use config::{DataConfig, ExperimentConfig, PatternChoice};
pub use data::{generate_data, load_data_csv, DEFAULT_CORRELATION, MODE_SHARE};
pub use sweep::{
    canonical_order, derive_seed, run_band_sweep, run_extension_sweep, run_rank_survey,
    write_rank_csv, write_records_csv, RankRecord, RankSource, RankSurvey, SweepRecord,
};
