//! Semi-supervised consistency training for attention-based
//! sequence-to-sequence speech recognition.
//!
//! The crate bundles a synthetic speech-like corpus, an encoder–decoder ASR
//! model, a speaker-conditioned TTS model, SpecAugment and speech-chain
//! reconstruction augmentations, and a FixMatch-style trainer with static or
//! dynamic pseudo transcripts.

pub mod asr;
pub mod augment;
pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod kv;
pub mod nn;
pub mod trainer;
pub mod tts;

pub use error::{Error, Result};
