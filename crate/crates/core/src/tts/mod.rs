//! Speaker-conditioned text-to-feature synthesis.

mod model;
mod train;

pub use model::{frame_loss, stop_targets, FramePrediction, TtsConfig, TtsModel, FRAMES_PER_STEP};
pub use train::{train_tts, tts_supervised_loss, tts_unsupervised_loss, TtsSample, TtsTrainConfig, TtsTraining};
