//! Splitting, standardization, training, evaluation and ablation sweeps.

mod checkpoint;
mod experiment;
mod metrics;
mod split;
mod train;

pub use checkpoint::{Checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use experiment::{
    ablate, fit_arm, graph_for_run, graph_from_sessions, mean_test_auc, prepare_inputs, run_experiment,
    write_ablation_csv, write_metrics_csv, AblationParam, AblationRow, Arm, ArmResult, Manifest, METRICS_HEADER,
};
pub use metrics::{calibrate_threshold, flag_rate, recall_at_flag_rate, recall_at_threshold, roc_auc, Metrics};
pub use split::{chronological_split, SplitSpec, Splits, Standardizer, STD_FLOOR};
pub use train::{
    balanced_pos_weight, evaluate_splits, labels_of, log_loss, nodes, summarize, train, EpochRecord, Predictor,
    TrainConfig, TrainOutcome,
};
