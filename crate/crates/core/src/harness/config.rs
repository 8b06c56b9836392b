use std::path::{Path, PathBuf};

use crate::asr::AsrConfig;
use crate::augment::{AugmentPolicy, WeakAugmentKind};
use crate::corpus::CorpusSpec;
use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::nn::Rule;
use crate::trainer::{AsrTrainConfig, Block, ConsistencyConfig, DynamicRefresh, Scenario, ScheduleConfig};
use crate::tts::{TtsConfig, TtsTrainConfig};

/// Everything a run needs, loaded from a flat key-value file. Absent keys
/// keep their defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: CorpusSpec,
    pub corpus_seed: u64,
    pub asr: AsrConfig,
    pub tts: TtsConfig,
    pub base_train: AsrTrainConfig,
    pub tts_train: TtsTrainConfig,
    pub consistency: ConsistencyConfig,
    pub weak: AugmentPolicy,
    pub strong: AugmentPolicy,
    /// The single scenario used by `train-consistency`.
    pub scenario: Scenario,
    pub blocks: Vec<Block>,
    pub weak_kinds: Vec<WeakAugmentKind>,
    pub taus: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let corpus = CorpusSpec {
            noise_std: 0.5,
            ..CorpusSpec::default()
        };
        let f = corpus.feature_dim;
        let mut base_train = AsrTrainConfig::base();
        base_train.schedule.max_epochs = 40;
        let mut tts_train = TtsTrainConfig::default();
        tts_train.schedule.max_epochs = 15;
        let mut consistency = ConsistencyConfig::default();
        consistency.train.schedule.max_epochs = 10;
        Self {
            corpus,
            corpus_seed: 1,
            asr: AsrConfig {
                feature_dim: f,
                encoder_hidden: 32,
                decoder_hidden: 64,
                embedding: 16,
                attention: 32,
                ..AsrConfig::default()
            },
            tts: TtsConfig {
                feature_dim: f,
                ..TtsConfig::default()
            },
            base_train,
            tts_train,
            consistency,
            weak: AugmentPolicy::weak(2),
            strong: AugmentPolicy::strong(f, 10),
            scenario: Scenario::new(Block::ALL[3], WeakAugmentKind::SpeechChain, 0.7),
            blocks: Block::ALL.to_vec(),
            weak_kinds: WeakAugmentKind::ALL.to_vec(),
            taus: vec![0.5, 0.7, 0.9],
            seeds: vec![0, 1, 2],
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

fn parse_with<T>(map: &KvMap, key: &str, f: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
    match map.raw(key) {
        None => Ok(None),
        Some(v) => f(v)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("unknown value `{v}` for key `{key}`"))),
    }
}

fn parse_list_with<T>(map: &KvMap, key: &str, f: impl Fn(&str) -> Option<T>) -> Result<Option<Vec<T>>> {
    let Some(v) = map.raw(key) else { return Ok(None) };
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).ok_or_else(|| Error::Config(format!("unknown value `{s}` in list `{key}`"))))
        .collect::<Result<Vec<T>>>()
        .map(Some)
}

fn write_policy(map: &mut KvMap, prefix: &str, p: &AugmentPolicy) {
    map.set(&format!("{prefix}.n_masks"), p.n_masks);
    map.set(&format!("{prefix}.max_freq_width"), p.max_freq_width);
    map.set(&format!("{prefix}.max_time_width"), p.max_time_width);
    map.set(&format!("{prefix}.fill_value"), p.fill_value);
}

fn read_policy(map: &KvMap, prefix: &str, p: &mut AugmentPolicy) -> Result<()> {
    map.update(&format!("{prefix}.n_masks"), &mut p.n_masks)?;
    map.update(&format!("{prefix}.max_freq_width"), &mut p.max_freq_width)?;
    map.update(&format!("{prefix}.max_time_width"), &mut p.max_time_width)?;
    map.update(&format!("{prefix}.fill_value"), &mut p.fill_value)
}

pub(crate) fn write_asr(map: &mut KvMap, prefix: &str, c: &AsrConfig) {
    map.set(&format!("{prefix}.feature_dim"), c.feature_dim);
    map.set(&format!("{prefix}.encoder_layers"), c.encoder_layers);
    map.set(&format!("{prefix}.encoder_hidden"), c.encoder_hidden);
    map.set(&format!("{prefix}.decoder_hidden"), c.decoder_hidden);
    map.set(&format!("{prefix}.embedding"), c.embedding);
    map.set(&format!("{prefix}.attention"), c.attention);
    map.set(&format!("{prefix}.init_range"), c.init_range);
}

pub(crate) fn read_asr(map: &KvMap, prefix: &str, c: &mut AsrConfig) -> Result<()> {
    map.update(&format!("{prefix}.feature_dim"), &mut c.feature_dim)?;
    map.update(&format!("{prefix}.encoder_layers"), &mut c.encoder_layers)?;
    map.update(&format!("{prefix}.encoder_hidden"), &mut c.encoder_hidden)?;
    map.update(&format!("{prefix}.decoder_hidden"), &mut c.decoder_hidden)?;
    map.update(&format!("{prefix}.embedding"), &mut c.embedding)?;
    map.update(&format!("{prefix}.attention"), &mut c.attention)?;
    map.update(&format!("{prefix}.init_range"), &mut c.init_range)
}

pub(crate) fn write_tts(map: &mut KvMap, prefix: &str, c: &TtsConfig) {
    map.set(&format!("{prefix}.feature_dim"), c.feature_dim);
    map.set(&format!("{prefix}.speaker_dim"), c.speaker_dim);
    map.set(&format!("{prefix}.embedding"), c.embedding);
    map.set(&format!("{prefix}.encoder_hidden"), c.encoder_hidden);
    map.set(&format!("{prefix}.decoder_hidden"), c.decoder_hidden);
    map.set(&format!("{prefix}.attention"), c.attention);
    map.set(&format!("{prefix}.frames_per_step"), c.frames_per_step);
    map.set(&format!("{prefix}.init_range"), c.init_range);
}

pub(crate) fn read_tts(map: &KvMap, prefix: &str, c: &mut TtsConfig) -> Result<()> {
    map.update(&format!("{prefix}.feature_dim"), &mut c.feature_dim)?;
    map.update(&format!("{prefix}.speaker_dim"), &mut c.speaker_dim)?;
    map.update(&format!("{prefix}.embedding"), &mut c.embedding)?;
    map.update(&format!("{prefix}.encoder_hidden"), &mut c.encoder_hidden)?;
    map.update(&format!("{prefix}.decoder_hidden"), &mut c.decoder_hidden)?;
    map.update(&format!("{prefix}.attention"), &mut c.attention)?;
    map.update(&format!("{prefix}.frames_per_step"), &mut c.frames_per_step)?;
    map.update(&format!("{prefix}.init_range"), &mut c.init_range)
}

fn write_schedule(map: &mut KvMap, prefix: &str, s: &ScheduleConfig) {
    map.set(&format!("{prefix}.lr"), s.initial_lr);
    map.set(&format!("{prefix}.decay_factor"), s.decay_factor);
    map.set(&format!("{prefix}.min_lr_fraction"), s.min_lr_fraction);
    map.set(&format!("{prefix}.patience"), s.patience);
    map.set(&format!("{prefix}.max_epochs"), s.max_epochs);
}

fn read_schedule(map: &KvMap, prefix: &str, s: &mut ScheduleConfig) -> Result<()> {
    map.update(&format!("{prefix}.lr"), &mut s.initial_lr)?;
    map.update(&format!("{prefix}.decay_factor"), &mut s.decay_factor)?;
    map.update(&format!("{prefix}.min_lr_fraction"), &mut s.min_lr_fraction)?;
    map.update(&format!("{prefix}.patience"), &mut s.patience)?;
    map.update(&format!("{prefix}.max_epochs"), &mut s.max_epochs)
}

fn write_asr_train(map: &mut KvMap, prefix: &str, t: &AsrTrainConfig) {
    map.set(&format!("{prefix}.batch_size"), t.batch_size);
    write_schedule(map, prefix, &t.schedule);
    if let Rule::AdaDelta { rho, eps } = t.rule {
        map.set(&format!("{prefix}.adadelta_rho"), rho);
        map.set(&format!("{prefix}.adadelta_eps"), eps);
    }
    map.set(&format!("{prefix}.clip_norm"), t.clip_norm.unwrap_or(0.0));
}

fn read_asr_train(map: &KvMap, prefix: &str, t: &mut AsrTrainConfig) -> Result<()> {
    map.update(&format!("{prefix}.batch_size"), &mut t.batch_size)?;
    read_schedule(map, prefix, &mut t.schedule)?;
    if let Rule::AdaDelta { rho, eps } = &mut t.rule {
        map.update(&format!("{prefix}.adadelta_rho"), rho)?;
        map.update(&format!("{prefix}.adadelta_eps"), eps)?;
    }
    if let Some(c) = map.get::<f64>(&format!("{prefix}.clip_norm"))? {
        t.clip_norm = (c > 0.0).then_some(c);
    }
    Ok(())
}

pub const KNOWN_KEYS: &[&str] = &[
    "corpus.seed",
    "corpus.speakers",
    "corpus.labeled",
    "corpus.unlabeled",
    "corpus.dev",
    "corpus.test",
    "corpus.labeled_speakers",
    "corpus.feature_dim",
    "corpus.noise_std",
    "corpus.gain_depth",
    "asr.feature_dim",
    "asr.encoder_layers",
    "asr.encoder_hidden",
    "asr.decoder_hidden",
    "asr.embedding",
    "asr.attention",
    "asr.init_range",
    "tts.feature_dim",
    "tts.speaker_dim",
    "tts.embedding",
    "tts.encoder_hidden",
    "tts.decoder_hidden",
    "tts.attention",
    "tts.frames_per_step",
    "tts.init_range",
    "base.batch_size",
    "base.lr",
    "base.decay_factor",
    "base.min_lr_fraction",
    "base.patience",
    "base.max_epochs",
    "base.adadelta_rho",
    "base.adadelta_eps",
    "base.clip_norm",
    "consistency.batch_size",
    "consistency.lr",
    "consistency.decay_factor",
    "consistency.min_lr_fraction",
    "consistency.patience",
    "consistency.max_epochs",
    "consistency.adadelta_rho",
    "consistency.adadelta_eps",
    "consistency.clip_norm",
    "consistency.dynamic_refresh",
    "tts_train.batch_size",
    "tts_train.lr",
    "tts_train.decay_factor",
    "tts_train.min_lr_fraction",
    "tts_train.patience",
    "tts_train.max_epochs",
    "tts_train.clip_norm",
    "augment.weak.n_masks",
    "augment.weak.max_freq_width",
    "augment.weak.max_time_width",
    "augment.weak.fill_value",
    "augment.strong.n_masks",
    "augment.strong.max_freq_width",
    "augment.strong.max_time_width",
    "augment.strong.fill_value",
    "scenario.block",
    "scenario.weak_kind",
    "scenario.tau",
    "scenario.lambda_con",
    "matrix.blocks",
    "matrix.weak_kinds",
    "matrix.taus",
    "matrix.seeds",
    "output.dir",
];

impl ExperimentConfig {
    pub fn from_kv(map: &KvMap) -> Result<Self> {
        let unknown = map.unknown_keys(KNOWN_KEYS);
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        let mut c = Self::default();
        map.update("corpus.seed", &mut c.corpus_seed)?;
        let s = &mut c.corpus;
        map.update("corpus.speakers", &mut s.speakers)?;
        map.update("corpus.labeled", &mut s.labeled)?;
        map.update("corpus.unlabeled", &mut s.unlabeled)?;
        map.update("corpus.dev", &mut s.dev)?;
        map.update("corpus.test", &mut s.test)?;
        if let Some(k) = map.get::<usize>("corpus.labeled_speakers")? {
            s.labeled_speakers = (k > 0).then_some(k);
        }
        map.update("corpus.feature_dim", &mut s.feature_dim)?;
        map.update("corpus.noise_std", &mut s.noise_std)?;
        map.update("corpus.gain_depth", &mut s.gain_depth)?;
        // Model input sizes follow the corpus unless set explicitly.
        c.asr.feature_dim = s.feature_dim;
        c.tts.feature_dim = s.feature_dim;
        c.strong.max_freq_width = AugmentPolicy::strong(s.feature_dim, 0).max_freq_width;
        read_asr(map, "asr", &mut c.asr)?;
        read_tts(map, "tts", &mut c.tts)?;
        read_asr_train(map, "base", &mut c.base_train)?;
        read_asr_train(map, "consistency", &mut c.consistency.train)?;
        if let Some(r) = parse_with(map, "consistency.dynamic_refresh", DynamicRefresh::parse)? {
            c.consistency.refresh = r;
        }
        map.update("tts_train.batch_size", &mut c.tts_train.batch_size)?;
        read_schedule(map, "tts_train", &mut c.tts_train.schedule)?;
        if let Some(v) = map.get::<f64>("tts_train.clip_norm")? {
            c.tts_train.clip_norm = (v > 0.0).then_some(v);
        }
        read_policy(map, "augment.weak", &mut c.weak)?;
        read_policy(map, "augment.strong", &mut c.strong)?;
        if let Some(b) = parse_with(map, "scenario.block", Block::parse)? {
            c.scenario.mode = b.mode;
            c.scenario.input = b.input;
        }
        if let Some(k) = parse_with(map, "scenario.weak_kind", WeakAugmentKind::parse)? {
            c.scenario.weak_kind = k;
        }
        map.update("scenario.tau", &mut c.scenario.tau)?;
        map.update("scenario.lambda_con", &mut c.scenario.lambda_con)?;
        if let Some(b) = parse_list_with(map, "matrix.blocks", Block::parse)? {
            c.blocks = b;
        }
        if let Some(k) = parse_list_with(map, "matrix.weak_kinds", WeakAugmentKind::parse)? {
            c.weak_kinds = k;
        }
        if let Some(t) = map.list("matrix.taus")? {
            c.taus = t;
        }
        if let Some(s) = map.list("matrix.seeds")? {
            c.seeds = s;
        }
        if let Some(d) = map.raw("output.dir") {
            c.output_dir = PathBuf::from(d);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&KvMap::parse(&text)?)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::default();
        let s = &self.corpus;
        m.set("corpus.seed", self.corpus_seed);
        m.set("corpus.speakers", s.speakers);
        m.set("corpus.labeled", s.labeled);
        m.set("corpus.unlabeled", s.unlabeled);
        m.set("corpus.dev", s.dev);
        m.set("corpus.test", s.test);
        m.set("corpus.labeled_speakers", s.labeled_speakers.unwrap_or(0));
        m.set("corpus.feature_dim", s.feature_dim);
        m.set("corpus.noise_std", s.noise_std);
        m.set("corpus.gain_depth", s.gain_depth);
        write_asr(&mut m, "asr", &self.asr);
        write_tts(&mut m, "tts", &self.tts);
        write_asr_train(&mut m, "base", &self.base_train);
        write_asr_train(&mut m, "consistency", &self.consistency.train);
        m.set("consistency.dynamic_refresh", self.consistency.refresh.as_str());
        m.set("tts_train.batch_size", self.tts_train.batch_size);
        write_schedule(&mut m, "tts_train", &self.tts_train.schedule);
        m.set("tts_train.clip_norm", self.tts_train.clip_norm.unwrap_or(0.0));
        write_policy(&mut m, "augment.weak", &self.weak);
        write_policy(&mut m, "augment.strong", &self.strong);
        m.set("scenario.block", self.scenario.block().name());
        m.set("scenario.weak_kind", self.scenario.weak_kind.as_str());
        m.set("scenario.tau", self.scenario.tau);
        m.set("scenario.lambda_con", self.scenario.lambda_con);
        let join = |v: Vec<String>| v.join(", ");
        m.set("matrix.blocks", join(self.blocks.iter().map(|b| b.name()).collect()));
        m.set("matrix.weak_kinds", join(self.weak_kinds.iter().map(|k| k.as_str().to_string()).collect()));
        m.set("matrix.taus", join(self.taus.iter().map(f64::to_string).collect()));
        m.set("matrix.seeds", join(self.seeds.iter().map(u64::to_string).collect()));
        m.set("output.dir", self.output_dir.display());
        m
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.asr.validate()?;
        self.tts.validate()?;
        self.scenario.validate()?;
        if self.asr.feature_dim != self.corpus.feature_dim || self.tts.feature_dim != self.corpus.feature_dim {
            return Err(Error::Config("model feature_dim must match corpus.feature_dim".into()));
        }
        if self.taus.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("matrix.taus must lie in [0, 1]".into()));
        }
        if self.taus.is_empty() || self.seeds.is_empty() || self.blocks.is_empty() || self.weak_kinds.is_empty() {
            return Err(Error::Config("matrix lists must be non-empty".into()));
        }
        for p in [&self.weak, &self.strong] {
            if p.max_freq_width > self.corpus.feature_dim {
                return Err(Error::Config("mask width exceeds corpus.feature_dim".into()));
            }
        }
        Ok(())
    }
}
