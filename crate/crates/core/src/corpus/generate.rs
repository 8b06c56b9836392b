//! Synthetic speech-like corpus.
//!
//! Every vocabulary token owns a fixed spectral prototype: a duration drawn
//! from `frames_per_token` and two anchor spectra that the segment glides
//! between linearly. An utterance concatenates the prototypes of its
//! transcript, multiplies each frame element-wise by its speaker's smooth
//! spectral gain curve, and adds i.i.d. Gaussian noise.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::features::{quantize, FeatureSequence};
use super::vocab::{tokenize, TokenSequence, Vocabulary, SPACE, VOCAB_SIZE};
use crate::error::{Error, Result};
use crate::nn::Mat;

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub speakers: usize,
    pub labeled: usize,
    pub unlabeled: usize,
    pub dev: usize,
    pub test: usize,
    /// When set, labeled utterances come only from speakers `0..k` and
    /// unlabeled ones from `k..speakers`. Dev and test always use everyone.
    pub labeled_speakers: Option<usize>,
    pub feature_dim: usize,
    pub frames_per_token: (usize, usize),
    pub words: (usize, usize),
    pub word_len: (usize, usize),
    pub alphabet: String,
    pub noise_std: f64,
    /// Peak deviation of a speaker gain curve from 1.
    pub gain_depth: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            speakers: 4,
            labeled: 1000,
            unlabeled: 1000,
            dev: 250,
            test: 250,
            labeled_speakers: None,
            feature_dim: 20,
            frames_per_token: (3, 5),
            words: (1, 3),
            word_len: (1, 4),
            alphabet: "etaoinshrd".to_string(),
            noise_std: 0.1,
            gain_depth: 0.5,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.speakers == 0 {
            return bad("at least one speaker is required");
        }
        if self.labeled + self.unlabeled + self.dev + self.test == 0 {
            return bad("zero utterances requested");
        }
        if self.dev == 0 || self.test == 0 {
            return bad("dev and test splits must be non-empty");
        }
        if let Some(k) = self.labeled_speakers {
            if k == 0 || k > self.speakers {
                return bad("labeled_speakers must be in 1..=speakers");
            }
            if k == self.speakers && self.unlabeled > 0 {
                return bad("labeled_speakers leaves no speakers for the unlabeled split");
            }
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive");
        }
        let ranges = [self.frames_per_token, self.words, self.word_len];
        if ranges.iter().any(|&(lo, hi)| lo == 0 || lo > hi) {
            return bad("ranges must satisfy 1 <= min <= max");
        }
        if self.alphabet.is_empty() {
            return bad("alphabet is empty");
        }
        if tokenize(&self.alphabet, &Vocabulary::default()).is_err() || self.alphabet.contains(' ') {
            return bad("alphabet must contain only a-z and apostrophe");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be a finite non-negative number");
        }
        if !(0.0..1.0).contains(&self.gain_depth) {
            return bad("gain_depth must be in [0, 1)");
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.labeled + self.unlabeled + self.dev + self.test
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Labeled,
    Unlabeled,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Labeled => "labeled",
            Split::Unlabeled => "unlabeled",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "labeled" => Some(Split::Labeled),
            "unlabeled" => Some(Split::Unlabeled),
            "dev" => Some(Split::Dev),
            "test" => Some(Split::Test),
            _ => None,
        }
    }

    pub fn is_transcribed(self) -> bool {
        self != Split::Unlabeled
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub speaker: usize,
    pub features: FeatureSequence,
    /// Present iff the utterance belongs to a transcribed split.
    pub transcript: Option<TokenSequence>,
}

impl Utterance {
    pub fn transcript(&self) -> Result<&TokenSequence> {
        self.transcript
            .as_ref()
            .ok_or_else(|| Error::MissingTranscript(self.id.clone()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSplit {
    pub labeled: Vec<Utterance>,
    pub unlabeled: Vec<Utterance>,
    pub dev: Vec<Utterance>,
    pub test: Vec<Utterance>,
    pub seed: u64,
}

impl CorpusSplit {
    pub fn split(&self, which: Split) -> &[Utterance] {
        match which {
            Split::Labeled => &self.labeled,
            Split::Unlabeled => &self.unlabeled,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Split, &Utterance)> {
        [Split::Labeled, Split::Unlabeled, Split::Dev, Split::Test]
            .into_iter()
            .flat_map(move |s| self.split(s).iter().map(move |u| (s, u)))
    }

    pub fn feature_dim(&self) -> usize {
        self.iter().next().map_or(0, |(_, u)| u.features.dim())
    }
}

/// Fixed per-token prototypes and per-speaker gain curves derived from a seed.
#[derive(Clone, Debug)]
pub struct Synthesizer {
    feature_dim: usize,
    durations: Vec<usize>,
    anchors: Vec<(Vec<f64>, Vec<f64>)>,
    gains: Vec<Vec<f64>>,
    noise_std: f64,
}

impl Synthesizer {
    pub fn new(spec: &CorpusSpec, seed: u64) -> Self {
        let mut rng = stream(seed, 0);
        let f = spec.feature_dim;
        let mut durations = Vec::with_capacity(VOCAB_SIZE);
        let mut anchors = Vec::with_capacity(VOCAB_SIZE);
        for id in 0..VOCAB_SIZE {
            durations.push(rng.gen_range(spec.frames_per_token.0..=spec.frames_per_token.1));
            let mut draw = || -> Vec<f64> { (0..f).map(|_| rng.sample::<f64, _>(StandardNormal)).collect() };
            let (a, b) = (draw(), draw());
            if id == SPACE {
                // Low-energy pause between words.
                anchors.push((a.iter().map(|v| 0.2 * v).collect(), b.iter().map(|v| 0.2 * v).collect()));
            } else {
                anchors.push((a, b));
            }
        }
        let gains = (0..spec.speakers)
            .map(|_| {
                let cycles: f64 = rng.gen_range(0.5..1.5);
                let phase: f64 = rng.gen_range(0.0..2.0 * PI);
                (0..f)
                    .map(|bin| 1.0 + spec.gain_depth * (2.0 * PI * cycles * bin as f64 / f as f64 + phase).sin())
                    .collect()
            })
            .collect();
        Self {
            feature_dim: f,
            durations,
            anchors,
            gains,
            noise_std: spec.noise_std,
        }
    }

    pub fn token_duration(&self, id: usize) -> usize {
        self.durations[id]
    }

    pub fn gain(&self, speaker: usize) -> &[f64] {
        &self.gains[speaker]
    }

    /// Renders `tokens` for `speaker`, drawing noise from `rng`.
    pub fn render<R: Rng>(&self, tokens: &TokenSequence, speaker: usize, rng: &mut R) -> FeatureSequence {
        let total: usize = tokens.ids().iter().map(|&id| self.durations[id]).sum();
        let f = self.feature_dim;
        let mut m = Mat::zeros(total.max(1), f);
        let gain = &self.gains[speaker];
        let mut s = 0;
        for &id in tokens.ids() {
            let d = self.durations[id];
            let (a, b) = &self.anchors[id];
            for k in 0..d {
                let w = if d == 1 { 0.5 } else { k as f64 / (d - 1) as f64 };
                let row = m.row_mut(s);
                for bin in 0..f {
                    row[bin] = gain[bin] * ((1.0 - w) * a[bin] + w * b[bin]);
                }
                s += 1;
            }
        }
        if self.noise_std > 0.0 {
            for v in &mut m.data {
                *v += self.noise_std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        quantize(&FeatureSequence::new(m).expect("finite synthetic frames"))
    }
}

/// Independent RNG stream for `(seed, index)`.
pub(crate) fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn random_text<R: Rng>(spec: &CorpusSpec, rng: &mut R) -> String {
    let letters: Vec<char> = spec.alphabet.chars().collect();
    let n_words = rng.gen_range(spec.words.0..=spec.words.1);
    let words: Vec<String> = (0..n_words)
        .map(|_| {
            let len = rng.gen_range(spec.word_len.0..=spec.word_len.1);
            (0..len).map(|_| *letters.choose(rng).unwrap()).collect()
        })
        .collect();
    words.join(" ")
}

/// Generates the four splits. Utterance `i` (in labeled, unlabeled, dev, test
/// order) draws from its own stream `(seed, i + 1)`, so the result does not
/// depend on generation order.
pub fn generate_corpus(spec: &CorpusSpec, seed: u64) -> Result<CorpusSplit> {
    spec.validate()?;
    let vocab = Vocabulary::default();
    let synth = Synthesizer::new(spec, seed);
    let layout = [
        (Split::Labeled, spec.labeled),
        (Split::Unlabeled, spec.unlabeled),
        (Split::Dev, spec.dev),
        (Split::Test, spec.test),
    ];
    let mut out = CorpusSplit {
        labeled: Vec::with_capacity(spec.labeled),
        unlabeled: Vec::with_capacity(spec.unlabeled),
        dev: Vec::with_capacity(spec.dev),
        test: Vec::with_capacity(spec.test),
        seed,
    };
    let mut index = 0u64;
    for (split, count) in layout {
        for k in 0..count {
            let mut rng = stream(seed, index + 1);
            index += 1;
            let speakers = match (split, spec.labeled_speakers) {
                (Split::Labeled, Some(n)) => 0..n,
                (Split::Unlabeled, Some(n)) => n..spec.speakers,
                _ => 0..spec.speakers,
            };
            let speaker = rng.gen_range(speakers);
            let text = random_text(spec, &mut rng);
            let tokens = tokenize(&text, &vocab)?;
            let features = synth.render(&tokens, speaker, &mut rng);
            let utt = Utterance {
                id: format!("{}-{k:05}", split.as_str()),
                speaker,
                features,
                transcript: split.is_transcribed().then_some(tokens),
            };
            match split {
                Split::Labeled => out.labeled.push(utt),
                Split::Unlabeled => out.unlabeled.push(utt),
                Split::Dev => out.dev.push(utt),
                Split::Test => out.test.push(utt),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    fn small() -> CorpusSpec {
        CorpusSpec {
            labeled: 30,
            unlabeled: 20,
            dev: 10,
            test: 10,
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let spec = CorpusSpec::default();
        let c = generate_corpus(&spec, 3).unwrap();
        assert_eq!(c.labeled.len(), 1000);
        assert_eq!(c.unlabeled.len(), 1000);
        assert_eq!(c.dev.len(), 250);
        assert_eq!(c.test.len(), 250);
        let ids: HashSet<&str> = c.iter().map(|(_, u)| u.id.as_str()).collect();
        assert_eq!(ids.len(), 2500);
        assert!(c.labeled.iter().chain(&c.dev).chain(&c.test).all(|u| u.transcript.is_some()));
        assert!(c.unlabeled.iter().all(|u| u.transcript.is_none()));
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(generate_corpus(&small(), 7).unwrap(), generate_corpus(&small(), 7).unwrap());
        assert_ne!(generate_corpus(&small(), 7).unwrap(), generate_corpus(&small(), 8).unwrap());
    }

    #[test]
    fn noiseless_renders_depend_only_on_transcript_and_speaker() {
        let spec = CorpusSpec {
            noise_std: 0.0,
            labeled: 400,
            words: (1, 1),
            word_len: (1, 2),
            alphabet: "ab".into(),
            ..small()
        };
        let c = generate_corpus(&spec, 11).unwrap();
        let mut groups: HashMap<(Vec<usize>, usize), &FeatureSequence> = HashMap::new();
        let mut compared = 0;
        for u in c.iter().map(|(_, u)| u).filter(|u| u.transcript.is_some()) {
            let key = (u.transcript.clone().unwrap().0, u.speaker);
            if let Some(prev) = groups.get(&key) {
                assert_eq!(*prev, &u.features);
                compared += 1;
            } else {
                groups.insert(key, &u.features);
            }
        }
        assert!(compared > 100);
    }

    #[test]
    fn frame_count_is_sum_of_token_durations() {
        let spec = small();
        let c = generate_corpus(&spec, 5).unwrap();
        let synth = Synthesizer::new(&spec, 5);
        for u in &c.labeled {
            let expect: usize = u.transcript.as_ref().unwrap().ids().iter().map(|&i| synth.token_duration(i)).sum();
            assert_eq!(u.features.len(), expect);
            assert_eq!(u.features.dim(), 20);
        }
    }

    #[test]
    fn labeled_speaker_partition() {
        let spec = CorpusSpec {
            labeled_speakers: Some(2),
            ..small()
        };
        let c = generate_corpus(&spec, 1).unwrap();
        assert!(c.labeled.iter().all(|u| u.speaker < 2));
        assert!(c.unlabeled.iter().all(|u| u.speaker >= 2));
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let zero = CorpusSpec {
            labeled: 0,
            unlabeled: 0,
            dev: 0,
            test: 0,
            ..small()
        };
        assert!(matches!(generate_corpus(&zero, 0), Err(Error::InvalidSpec(_))));
        let bad_range = CorpusSpec {
            frames_per_token: (4, 2),
            ..small()
        };
        assert!(generate_corpus(&bad_range, 0).is_err());
        let bad_alpha = CorpusSpec {
            alphabet: "ab1".into(),
            ..small()
        };
        assert!(generate_corpus(&bad_alpha, 0).is_err());
    }
}
