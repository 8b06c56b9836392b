use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::base::{dev_accuracy, labeled_pairs, AsrTrainConfig};
use super::log::MetricLog;
use super::schedule::{TrainState, Verdict};
use crate::asr::{accumulate_supervised, teacher_inputs, transcribe, AsrModel, Role};
use crate::augment::{apply_strong, apply_weak, mix_seed, AugmentContext, WeakAugmentKind};
use crate::corpus::{FeatureSequence, TokenSequence, Utterance};
use crate::error::{Error, Result};
use crate::nn::ops::argmax;
use crate::nn::{Optimizer, Parameterized};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TranscriptMode {
    /// Produced once before training by the frozen base model.
    Static,
    /// Re-produced during training by the student itself.
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TranscriptInput {
    Original,
    WeakPerturbed,
}

/// How often dynamic pseudo transcripts are refreshed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynamicRefresh {
    PerBatch,
    PerEpoch,
}

impl TranscriptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::Dynamic => "dynamic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Static, Self::Dynamic].into_iter().find(|m| m.as_str() == s)
    }
}

impl TranscriptInput {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Original => "original",
            Self::WeakPerturbed => "weak_perturbed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Original, Self::WeakPerturbed].into_iter().find(|m| m.as_str() == s)
    }
}

impl DynamicRefresh {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PerBatch => "per_batch",
            Self::PerEpoch => "per_epoch",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::PerBatch, Self::PerEpoch].into_iter().find(|m| m.as_str() == s)
    }
}

/// Where pseudo transcripts come from: (mode, input). The four combinations
/// form the four blocks of the scenario matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Block {
    pub mode: TranscriptMode,
    pub input: TranscriptInput,
}

impl Block {
    pub const ALL: [Block; 4] = [
        Block::new(TranscriptMode::Static, TranscriptInput::Original),
        Block::new(TranscriptMode::Static, TranscriptInput::WeakPerturbed),
        Block::new(TranscriptMode::Dynamic, TranscriptInput::Original),
        Block::new(TranscriptMode::Dynamic, TranscriptInput::WeakPerturbed),
    ];

    pub const fn new(mode: TranscriptMode, input: TranscriptInput) -> Self {
        Self { mode, input }
    }

    /// `mode/input`, e.g. `dynamic/weak_perturbed`.
    pub fn name(self) -> String {
        format!("{}/{}", self.mode.as_str(), self.input.as_str())
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (m, i) = s.split_once('/')?;
        Some(Self::new(TranscriptMode::parse(m)?, TranscriptInput::parse(i)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scenario {
    pub mode: TranscriptMode,
    pub input: TranscriptInput,
    pub weak_kind: WeakAugmentKind,
    /// Confidence threshold; a position contributes iff its confidence is
    /// strictly greater.
    pub tau: f64,
    pub lambda_con: f64,
}

pub const DEFAULT_LAMBDA_CON: f64 = 0.1;

impl Scenario {
    pub fn new(block: Block, weak_kind: WeakAugmentKind, tau: f64) -> Self {
        Self {
            mode: block.mode,
            input: block.input,
            weak_kind,
            tau,
            lambda_con: DEFAULT_LAMBDA_CON,
        }
    }

    pub fn block(&self) -> Block {
        Block::new(self.mode, self.input)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidArgument(format!("tau {} outside [0, 1]", self.tau)));
        }
        if !self.lambda_con.is_finite() || self.lambda_con < 0.0 {
            return Err(Error::InvalidArgument(format!("lambda_con {} must be non-negative", self.lambda_con)));
        }
        Ok(())
    }
}

/// Pseudo transcript `ỹ`, pseudo labels `ȳ`, and confidences `q` for one
/// unlabeled utterance; all three have the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoTarget {
    pub transcript: TokenSequence,
    pub labels: TokenSequence,
    pub confidences: Vec<f64>,
}

/// Beam-4 pseudo transcript (no trailing sos/eos). Static mode decodes with
/// the teacher, dynamic mode with the student; the input is `x_u` or its
/// weak realization per the scenario.
pub fn make_pseudo_transcript(
    x_u: &FeatureSequence,
    scenario: &Scenario,
    teacher: &AsrModel,
    student: &AsrModel,
    weak_x: &FeatureSequence,
) -> TokenSequence {
    let model = match scenario.mode {
        TranscriptMode::Static => teacher,
        TranscriptMode::Dynamic => student,
    };
    let input = match scenario.input {
        TranscriptInput::Original => x_u,
        TranscriptInput::WeakPerturbed => weak_x,
    };
    transcribe(model, input)
}

/// Teacher-forces `ỹ` on the weak input: `ȳ_t` is the argmax after prefix
/// `[sos, ỹ_1..ỹ_{t−1}]` and `q_t` its probability.
pub fn make_pseudo_labels(
    student: &AsrModel,
    weak_x: &FeatureSequence,
    transcript: &TokenSequence,
) -> Result<(TokenSequence, Vec<f64>)> {
    if transcript.is_empty() {
        return Err(Error::InvalidArgument("pseudo transcript is empty".into()));
    }
    let mem = student.memory(&student.encode(weak_x));
    let lps = student.forced_log_probs(&mem, &teacher_inputs(transcript.ids()));
    let mut labels = Vec::with_capacity(lps.len());
    let mut conf = Vec::with_capacity(lps.len());
    for lp in &lps {
        let k = argmax(lp);
        labels.push(k);
        conf.push(lp[k].exp());
    }
    Ok((TokenSequence(labels), conf))
}

fn check_aligned(transcript: &TokenSequence, labels: &TokenSequence, conf: &[f64]) -> Result<()> {
    if transcript.is_empty() || labels.len() != transcript.len() || conf.len() != transcript.len() {
        return Err(Error::InvalidArgument(format!(
            "pseudo transcript, labels, and confidences must be non-empty and aligned ({}, {}, {})",
            transcript.len(),
            labels.len(),
            conf.len()
        )));
    }
    Ok(())
}

/// Adds `grad_scale · ∂L_con/∂θ` to the gradients; returns `L_con`.
pub(crate) fn accumulate_consistency(
    student: &mut AsrModel,
    strong_x: &FeatureSequence,
    target: &PseudoTarget,
    tau: f64,
    grad_scale: f64,
) -> Result<f64> {
    check_aligned(&target.transcript, &target.labels, &target.confidences)?;
    let t = target.transcript.len() as f64;
    let weights: Vec<f64> = target
        .confidences
        .iter()
        .map(|&q| if q > tau { 1.0 / t } else { 0.0 })
        .collect();
    Ok(student.weighted_nll(
        strong_x,
        &teacher_inputs(target.transcript.ids()),
        target.labels.ids(),
        &weights,
        grad_scale,
    ))
}

/// `−(1/T) Σ_t 1(q_t > τ) log p(ȳ_t | ỹ_{1:t−1}, strong_x)` with `T = |ỹ|`.
/// Gradients are reset and then hold the gradient of this loss only.
pub fn consistency_loss(
    student: &mut AsrModel,
    strong_x: &FeatureSequence,
    transcript: &TokenSequence,
    labels: &TokenSequence,
    confidences: &[f64],
    tau: f64,
) -> Result<f64> {
    student.zero_grad();
    let target = PseudoTarget {
        transcript: transcript.clone(),
        labels: labels.clone(),
        confidences: confidences.to_vec(),
    };
    accumulate_consistency(student, strong_x, &target, tau, 1.0)
}

pub fn total_loss(sup: f64, con: f64, lambda_con: f64) -> f64 {
    sup + lambda_con * con
}

/// Supervised, consistency, and combined losses of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLoss {
    pub sup: f64,
    pub con: f64,
    pub total: f64,
}

/// Resets the gradients and fills them with the gradient of
/// `sup + λ·con`, where `sup` is the mean supervised loss over `labeled` and
/// `con` the mean consistency loss over `unlabeled` (strong input, target).
pub fn step_objective(
    student: &mut AsrModel,
    labeled: &[(&FeatureSequence, &TokenSequence)],
    unlabeled: &[(FeatureSequence, PseudoTarget)],
    tau: f64,
    lambda_con: f64,
) -> Result<StepLoss> {
    student.zero_grad();
    let sup = accumulate_supervised(student, labeled, 1.0)?;
    let mut con = 0.0;
    if !unlabeled.is_empty() {
        let n = unlabeled.len() as f64;
        for (strong, target) in unlabeled {
            con += accumulate_consistency(student, strong, target, tau, lambda_con / n)? / n;
        }
    }
    Ok(StepLoss {
        sup,
        con,
        total: total_loss(sup, con, lambda_con),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyConfig {
    pub train: AsrTrainConfig,
    pub refresh: DynamicRefresh,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            train: AsrTrainConfig::consistency(),
            refresh: DynamicRefresh::PerBatch,
        }
    }
}

/// Per-step counters, summed over an epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub sup: f64,
    pub con: f64,
    pub total: f64,
    /// Positions whose confidence passed the threshold.
    pub kept: usize,
    pub positions: usize,
    /// Unlabeled utterances skipped for an empty pseudo transcript.
    pub skipped: usize,
}

/// Consistency training of a student initialized from `base`. Each step
/// pairs a labeled batch with an equal-size unlabeled batch; one weak
/// realization per utterance feeds the pseudo transcript (when weak-input),
/// the pseudo labels, and the confidences; the consistency term is taken on a
/// strong realization of the original input. Returns the best dev-accuracy
/// student.
#[allow(clippy::too_many_arguments)]
pub fn train_consistency(
    scenario: &Scenario,
    labeled: &[Utterance],
    unlabeled: &[Utterance],
    dev: &[Utterance],
    base: &AsrModel,
    ctx: &AugmentContext,
    config: &ConsistencyConfig,
    seed: u64,
    log: &mut MetricLog,
) -> Result<AsrModel> {
    scenario.validate()?;
    if scenario.weak_kind == WeakAugmentKind::SpeechChain {
        let cache = ctx.cache.ok_or_else(|| {
            Error::InvalidArgument("speech-chain scenario requires a built reconstruction cache".into())
        })?;
        if let Some(u) = unlabeled.iter().find(|u| !cache.contains(&u.id)) {
            return Err(Error::CacheMiss(u.id.clone()));
        }
    }
    if labeled.is_empty() || unlabeled.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let pairs = labeled_pairs(labeled)?;
    let teacher = base.with_role(Role::Teacher);
    let mut student = base.with_role(Role::Student);
    let weak = |i: usize, epoch: u64, step: u64| {
        let u = &unlabeled[i];
        apply_weak(&u.id, &u.features, scenario.weak_kind, ctx, mix_seed(seed, &[1, epoch, step, i as u64]))
    };

    // Static transcripts are produced once, before any update.
    let mut cached: Vec<Option<TokenSequence>> = vec![None; unlabeled.len()];
    if scenario.mode == TranscriptMode::Static {
        for (i, u) in unlabeled.iter().enumerate() {
            let wx = weak(i, 0, u64::MAX)?;
            cached[i] = Some(make_pseudo_transcript(&u.features, scenario, &teacher, &student, &wx));
        }
    }

    let tc = &config.train;
    let bs = tc.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0xc0]));
    let mut opt = Optimizer::new(tc.rule, tc.clip_norm);
    let mut state = TrainState::new(tc.schedule.clone());
    let mut best = student.clone();
    let mut lab_order: Vec<usize> = (0..pairs.len()).collect();
    let mut unl_order: Vec<usize> = (0..unlabeled.len()).collect();
    let steps = pairs.len().max(unlabeled.len()).div_ceil(bs);
    loop {
        let epoch = state.epoch as u64 + 1;
        lab_order.shuffle(&mut rng);
        unl_order.shuffle(&mut rng);
        if scenario.mode == TranscriptMode::Dynamic && config.refresh == DynamicRefresh::PerEpoch {
            for (i, u) in unlabeled.iter().enumerate() {
                let wx = weak(i, epoch, u64::MAX)?;
                cached[i] = Some(make_pseudo_transcript(&u.features, scenario, &teacher, &student, &wx));
            }
        }
        let mut stats = StepStats::default();
        for step in 0..steps {
            let lab: Vec<(&FeatureSequence, &TokenSequence)> = (0..bs)
                .map(|k| lab_order[(step * bs + k) % lab_order.len()])
                .map(|i| (&pairs[i].0, &pairs[i].1))
                .collect();
            let unl: Vec<usize> = (0..bs).map(|k| unl_order[(step * bs + k) % unl_order.len()]).collect();

            // Targets are built from the pre-update student; no gradient flows through them.
            let mut targets = Vec::with_capacity(unl.len());
            for &i in &unl {
                let u = &unlabeled[i];
                let wx = weak(i, epoch, step as u64)?;
                let transcript = match &cached[i] {
                    Some(t) => t.clone(),
                    None => make_pseudo_transcript(&u.features, scenario, &teacher, &student, &wx),
                };
                if transcript.is_empty() {
                    stats.skipped += 1;
                    continue;
                }
                let (labels, confidences) = make_pseudo_labels(&student, &wx, &transcript)?;
                let strong = apply_strong(&u.features, ctx, mix_seed(seed, &[2, epoch, step as u64, i as u64]))?;
                targets.push((
                    strong,
                    PseudoTarget {
                        transcript,
                        labels,
                        confidences,
                    },
                ));
            }

            for (_, target) in &targets {
                stats.kept += target.confidences.iter().filter(|&&q| q > scenario.tau).count();
                stats.positions += target.confidences.len();
            }
            let loss = step_objective(&mut student, &lab, &targets, scenario.tau, scenario.lambda_con)?;
            stats.sup += loss.sup;
            stats.con += loss.con;
            stats.total += loss.total;
            opt.step(&mut student, state.lr);
        }
        let e = state.epoch + 1;
        let acc = dev_accuracy(&student, dev)?;
        let n = steps as f64;
        log.record(e, "train", "sup_loss", stats.sup / n)?;
        log.record(e, "train", "con_loss", stats.con / n)?;
        log.record(e, "train", "loss", stats.total / n)?;
        log.record(e, "train", "kept_fraction", stats.kept as f64 / stats.positions.max(1) as f64)?;
        log.record(e, "train", "skipped", stats.skipped as f64)?;
        log.record(e, "train", "lr", state.lr)?;
        log.record(e, "dev", "accuracy", acc)?;
        log::info!(
            "consistency epoch {e}: sup {:.4} con {:.4} kept {:.3} dev acc {acc:.4} lr {}",
            stats.sup / n,
            stats.con / n,
            stats.kept as f64 / stats.positions.max(1) as f64,
            state.lr
        );
        let verdict = state.observe(acc);
        if verdict == Verdict::Improved || (verdict == Verdict::Stop && state.bad_epochs == 0) {
            best = student.clone();
        }
        if verdict == Verdict::Stop {
            break;
        }
    }
    Ok(best)
}
