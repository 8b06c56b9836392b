//! Attention-based encoder–decoder ASR.

mod model;
mod ops;

pub use model::{
    subsampled_len, teacher_inputs, AsrConfig, AsrModel, DecoderState, EncoderStates, Role, SUBSAMPLE_FACTOR,
};
pub use ops::{
    accumulate_supervised, beam_decode, beam_from_memory, decode_step, encode, greedy_decode, greedy_from_memory,
    sequence_log_prob, supervised_loss, transcribe, Hypothesis, PSEUDO_BEAM,
};
