//! Experiment harness: run configuration, checkpoints, training loops,
//! evaluation and grid sweeps. The CLI binary is a thin layer over this
//! module; the runnable examples call it directly.

pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod runner;
pub mod sweep;
pub mod train;

pub use checkpoint::{Checkpoint, CheckpointError, ModelConfig};
pub use config::{ConfigError, ModelKind, RunConfig};
pub use eval::{
    decode_corpus, dump_span_scores, evaluate_model, evaluate_with, export_predicted_clusters,
    render_report, EvalError, EvalReport, EvalSettings,
};
pub use sweep::{default_modes, default_taus, run_sweep, SweepRow};
pub use train::{init_params, run_training, train_in_memory, TrainError, TrainOutcome};
