//! Weak and strong input augmentations.

mod chain;
mod specaug;

pub use chain::{
    apply_strong, apply_weak, speech_chain_reconstruct, AugmentContext, ReconstructionCache, WeakAugmentKind,
    CACHE_MARKER,
};
pub use specaug::{mix_seed, spec_augment, AugmentPolicy};
