use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use super::specaug::{mix_seed, spec_augment, AugmentPolicy};
use crate::asr::{transcribe, AsrModel};
use crate::corpus::{extract_speaker_embedding, quantize, read_matrix, write_matrix, FeatureSequence, Utterance};
use crate::error::{Error, Result};
use crate::tts::TtsModel;

/// Completion marker written last by [`ReconstructionCache::build`]; lists
/// covered utterance ids one per line.
pub const CACHE_MARKER: &str = "COMPLETE";

/// Reconstructs `x` through the frozen chain: decode with the base model,
/// embed the speaker, and resynthesize teacher-forced on `x` itself. The
/// output has the same frame count as `x` and f32 precision. An empty pseudo
/// transcript leaves `x` unchanged.
pub fn speech_chain_reconstruct(x: &FeatureSequence, base: &AsrModel, tts: &TtsModel) -> Result<FeatureSequence> {
    let pseudo = transcribe(base, x);
    if pseudo.is_empty() {
        log::warn!("empty pseudo transcript; reconstruction falls back to identity");
        return Ok(x.clone());
    }
    let spk = extract_speaker_embedding(x);
    let pred = tts.teacher_forced(&pseudo, &spk, x)?;
    Ok(quantize(&pred.real_frames()))
}

/// Reconstructions keyed by utterance id, stored as matrix files under a
/// directory and held in memory once loaded.
#[derive(Clone, Debug)]
pub struct ReconstructionCache {
    dir: PathBuf,
    entries: HashMap<String, FeatureSequence>,
}

fn entry_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.f32"))
}

impl ReconstructionCache {
    /// Reconstructs every utterance, writes the files, then the marker.
    pub fn build(dir: &Path, utts: &[Utterance], base: &AsrModel, tts: &TtsModel) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let marker = dir.join(CACHE_MARKER);
        if marker.exists() {
            fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
        }
        let mut entries = HashMap::with_capacity(utts.len());
        for u in utts {
            let rec = speech_chain_reconstruct(&u.features, base, tts)?;
            write_matrix(&entry_path(dir, &u.id), &rec)?;
            entries.insert(u.id.clone(), rec);
        }
        let ids: BTreeSet<&str> = utts.iter().map(|u| u.id.as_str()).collect();
        let listing: String = ids.iter().map(|id| format!("{id}\n")).collect();
        fs::write(&marker, listing).map_err(|e| Error::io(&marker, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries,
        })
    }

    /// Loads a completed cache; a directory without the marker is rejected.
    pub fn open(dir: &Path) -> Result<Self> {
        let marker = dir.join(CACHE_MARKER);
        let listing = fs::read_to_string(&marker)
            .map_err(|_| Error::format(&marker, "reconstruction cache is missing its completion marker"))?;
        let mut entries = HashMap::new();
        for id in listing.lines().filter(|l| !l.is_empty()) {
            entries.insert(id.to_string(), read_matrix(&entry_path(dir, id))?);
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            entries,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Result<&FeatureSequence> {
        self.entries.get(id).ok_or_else(|| Error::CacheMiss(id.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WeakAugmentKind {
    WeakSpecAugment,
    SpeechChain,
}

impl WeakAugmentKind {
    pub const ALL: [WeakAugmentKind; 2] = [WeakAugmentKind::WeakSpecAugment, WeakAugmentKind::SpeechChain];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::WeakSpecAugment => "weak_specaugment",
            Self::SpeechChain => "speech_chain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Everything the weak and strong augmentations need.
#[derive(Clone, Copy, Debug)]
pub struct AugmentContext<'a> {
    pub weak: AugmentPolicy,
    pub strong: AugmentPolicy,
    pub cache: Option<&'a ReconstructionCache>,
}

/// Weak augmentation of utterance `id`. SpecAugment draws from `seed`
/// (callers pass a fresh seed per batch and utterance); speech-chain mode
/// returns the cached reconstruction.
pub fn apply_weak(
    id: &str,
    x: &FeatureSequence,
    kind: WeakAugmentKind,
    ctx: &AugmentContext,
    seed: u64,
) -> Result<FeatureSequence> {
    match kind {
        WeakAugmentKind::WeakSpecAugment => spec_augment(x, &ctx.weak.fitted(x.len(), x.dim()), seed),
        WeakAugmentKind::SpeechChain => {
            let cache = ctx
                .cache
                .ok_or_else(|| Error::InvalidArgument("speech-chain augmentation needs a reconstruction cache".into()))?;
            Ok(cache.get(id)?.clone())
        }
    }
}

/// Strong SpecAugment with a draw from `seed`.
pub fn apply_strong(x: &FeatureSequence, ctx: &AugmentContext, seed: u64) -> Result<FeatureSequence> {
    spec_augment(x, &ctx.strong.fitted(x.len(), x.dim()), mix_seed(seed, &[0x5742]))
}
