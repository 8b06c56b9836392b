//! FixMatch-style consistency training and the supervised base trainer.

mod base;
mod consistency;
mod log;
mod schedule;

pub use base::{dev_accuracy, train_base, AsrTrainConfig};
pub use consistency::{
    consistency_loss, make_pseudo_labels, make_pseudo_transcript, total_loss, train_consistency, Block,
    ConsistencyConfig, DynamicRefresh, PseudoTarget, Scenario, StepLoss, StepStats, step_objective, TranscriptInput, TranscriptMode,
    DEFAULT_LAMBDA_CON,
};
pub use log::{MetricLog, MetricRecord};
pub use schedule::{Direction, ScheduleConfig, TrainState, Verdict};
