//! Batch experiments over the orchestration loop: seeded sweeps per
//! scenario kind, aggregate metrics, ablations, and the files and plots that
//! report them.

pub mod batch;
pub mod config;
pub mod output;
pub mod svg;

pub use batch::{
    aggregate, run_ablation, run_batch, AblationSetting, BatchError, BatchReport, EpisodeRow,
    KindSummary,
};
pub use config::{AblationSpec, BackendSpec, BatchConfig, ConfigError, Mode};
pub use output::{emit_ablation, emit_outputs, emit_plots, read_episode_table, read_report};
