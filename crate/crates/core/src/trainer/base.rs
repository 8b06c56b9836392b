use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::log::MetricLog;
use super::schedule::{ScheduleConfig, TrainState, Verdict};
use crate::asr::{accumulate_supervised, teacher_inputs, AsrConfig, AsrModel, Role};
use crate::corpus::{FeatureSequence, TokenSequence, Utterance};
use crate::error::{Error, Result};
use crate::nn::ops::argmax;
use crate::nn::{Optimizer, Parameterized, Rule};

#[derive(Clone, Debug, PartialEq)]
pub struct AsrTrainConfig {
    pub batch_size: usize,
    pub schedule: ScheduleConfig,
    pub rule: Rule,
    pub clip_norm: Option<f64>,
}

impl AsrTrainConfig {
    /// Base training: AdaDelta, rate 1.0, decay rate 0.1.
    pub fn base() -> Self {
        Self {
            batch_size: 20,
            schedule: ScheduleConfig::asr(1.0, 0.1, 30),
            rule: Rule::adadelta(),
            clip_norm: Some(5.0),
        }
    }

    /// Consistency training: AdaDelta, rate 0.5, decay rate 0.2.
    pub fn consistency() -> Self {
        Self {
            batch_size: 20,
            schedule: ScheduleConfig::asr(0.5, 0.2, 20),
            rule: Rule::adadelta(),
            clip_norm: Some(5.0),
        }
    }
}

/// Teacher-forced token accuracy: the fraction of target positions (the
/// final sos/eos included) where the argmax prediction equals the reference.
pub fn dev_accuracy(model: &AsrModel, dev: &[Utterance]) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for utt in dev {
        let targets = utt.transcript()?.with_eos();
        let mem = model.memory(&model.encode(&utt.features));
        let lps = model.forced_log_probs(&mem, &teacher_inputs(targets.ids()));
        for (lp, &y) in lps.iter().zip(targets.ids()) {
            correct += usize::from(argmax(lp) == y);
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(correct as f64 / total as f64)
}

pub(crate) fn labeled_pairs(utts: &[Utterance]) -> Result<Vec<(FeatureSequence, TokenSequence)>> {
    utts.iter()
        .map(|u| Ok((u.features.clone(), u.transcript()?.with_eos())))
        .collect()
}

/// Supervised training of the base model; returns the checkpoint with the
/// best dev accuracy.
pub fn train_base(
    labeled: &[Utterance],
    dev: &[Utterance],
    asr_config: &AsrConfig,
    config: &AsrTrainConfig,
    seed: u64,
    log: &mut MetricLog,
) -> Result<AsrModel> {
    if labeled.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let pairs = labeled_pairs(labeled)?;
    let mut model = AsrModel::new(asr_config.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xba5e);
    let mut opt = Optimizer::new(config.rule, config.clip_norm);
    let mut state = TrainState::new(config.schedule.clone());
    let mut best = model.clone();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    loop {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let batch: Vec<(&FeatureSequence, &TokenSequence)> = chunk.iter().map(|&i| (&pairs[i].0, &pairs[i].1)).collect();
            model.zero_grad();
            epoch_loss += accumulate_supervised(&mut model, &batch, 1.0)?;
            batches += 1;
            opt.step(&mut model, state.lr);
        }
        let epoch = state.epoch + 1;
        let acc = dev_accuracy(&model, dev)?;
        log.record(epoch, "train", "loss", epoch_loss / batches as f64)?;
        log.record(epoch, "dev", "accuracy", acc)?;
        log.record(epoch, "train", "lr", state.lr)?;
        log::info!("base epoch {epoch}: loss {:.4} dev acc {acc:.4} lr {}", epoch_loss / batches as f64, state.lr);
        let verdict = state.observe(acc);
        if verdict == Verdict::Improved || (verdict == Verdict::Stop && state.bad_epochs == 0) {
            best = model.clone();
        }
        if verdict == Verdict::Stop {
            break;
        }
    }
    best.role = Role::Base;
    Ok(best)
}
