use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{TtsConfig, TtsModel};
use crate::asr::{transcribe, AsrModel};
use crate::corpus::{extract_speaker_embedding, FeatureSequence, SpeakerEmbedding, TokenSequence, Utterance};
use crate::error::{Error, Result};
use crate::nn::{Optimizer, Parameterized, Rule};
use crate::trainer::{MetricLog, ScheduleConfig, TrainState, Verdict};

/// One TTS training example. `tokens` is the transcript for labeled data and
/// the pseudo transcript for unlabeled data.
#[derive(Clone, Copy, Debug)]
pub struct TtsSample<'a> {
    pub id: &'a str,
    pub features: &'a FeatureSequence,
    pub tokens: Option<&'a TokenSequence>,
    pub speaker: &'a SpeakerEmbedding,
}

fn accumulate(model: &mut TtsModel, batch: &[TtsSample], scale: f64, pseudo: bool) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let w = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for s in batch {
        let tokens = s.tokens.ok_or_else(|| {
            if pseudo {
                Error::MissingPseudoTranscript(s.id.to_string())
            } else {
                Error::MissingTranscript(s.id.to_string())
            }
        })?;
        total += w * model.loss_and_backward(tokens, s.speaker, s.features, scale * w)?;
    }
    Ok(total)
}

/// Mean frame loss over a batch of transcribed utterances; leaves the batch
/// gradient in the model.
pub fn tts_supervised_loss(model: &mut TtsModel, batch: &[TtsSample]) -> Result<f64> {
    model.zero_grad();
    accumulate(model, batch, 1.0, false)
}

/// Same loss on untranscribed audio paired with pseudo transcripts.
pub fn tts_unsupervised_loss(model: &mut TtsModel, batch: &[TtsSample]) -> Result<f64> {
    model.zero_grad();
    accumulate(model, batch, 1.0, true)
}

fn dev_loss(model: &TtsModel, dev: &[TtsSample]) -> Result<f64> {
    let mut probe = model.clone();
    accumulate(&mut probe, dev, 0.0, false)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TtsTrainConfig {
    pub batch_size: usize,
    pub schedule: ScheduleConfig,
    pub clip_norm: Option<f64>,
}

impl Default for TtsTrainConfig {
    /// Adam at 1e-3, ×0.1 on a dev-loss plateau.
    fn default() -> Self {
        Self {
            batch_size: 20,
            schedule: ScheduleConfig::tts(1e-3, 0.1, 30),
            clip_norm: Some(5.0),
        }
    }
}

pub struct TtsTraining {
    pub model: TtsModel,
    /// Pseudo transcripts of the unlabeled split, in input order. Computed once.
    pub pseudo_transcripts: Vec<TokenSequence>,
}

/// Trains the TTS model on labeled pairs plus unlabeled audio paired with
/// base-model pseudo transcripts. Each step takes one labeled batch and one
/// unlabeled batch and sums their losses. Returns the best dev-loss model.
pub fn train_tts(
    labeled: &[Utterance],
    unlabeled: &[Utterance],
    dev: &[Utterance],
    base: &AsrModel,
    tts_config: &TtsConfig,
    config: &TtsTrainConfig,
    seed: u64,
    log: &mut MetricLog,
) -> Result<TtsTraining> {
    if labeled.is_empty() || dev.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let pseudo_transcripts: Vec<TokenSequence> = unlabeled.iter().map(|u| transcribe(base, &u.features)).collect();
    let empty = pseudo_transcripts.iter().filter(|t| t.is_empty()).count();
    if empty > 0 {
        log::warn!("{empty} unlabeled utterances decoded to empty pseudo transcripts and are skipped");
    }
    let lab_spk: Vec<SpeakerEmbedding> = labeled.iter().map(|u| extract_speaker_embedding(&u.features)).collect();
    let unl_spk: Vec<SpeakerEmbedding> = unlabeled.iter().map(|u| extract_speaker_embedding(&u.features)).collect();
    let dev_spk: Vec<SpeakerEmbedding> = dev.iter().map(|u| extract_speaker_embedding(&u.features)).collect();
    let lab: Vec<TtsSample> = labeled
        .iter()
        .zip(&lab_spk)
        .map(|(u, s)| TtsSample {
            id: &u.id,
            features: &u.features,
            tokens: u.transcript.as_ref(),
            speaker: s,
        })
        .collect();
    let unl: Vec<TtsSample> = unlabeled
        .iter()
        .zip(&unl_spk)
        .zip(&pseudo_transcripts)
        .filter(|(_, t)| !t.is_empty())
        .map(|((u, s), t)| TtsSample {
            id: &u.id,
            features: &u.features,
            tokens: Some(t),
            speaker: s,
        })
        .collect();
    let dev_samples: Vec<TtsSample> = dev
        .iter()
        .zip(&dev_spk)
        .map(|(u, s)| TtsSample {
            id: &u.id,
            features: &u.features,
            tokens: u.transcript.as_ref(),
            speaker: s,
        })
        .collect();

    let mut model = TtsModel::new(tts_config.clone(), seed ^ 0x7755)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e57);
    let mut opt = Optimizer::new(Rule::adam(), config.clip_norm);
    let mut state = TrainState::new(config.schedule.clone());
    let mut best = model.clone();
    let bs = config.batch_size.max(1);
    let mut lab_order: Vec<usize> = (0..lab.len()).collect();
    let mut unl_order: Vec<usize> = (0..unl.len()).collect();
    loop {
        lab_order.shuffle(&mut rng);
        unl_order.shuffle(&mut rng);
        let mut unl_chunks = unl_order.chunks(bs).cycle();
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in lab_order.chunks(bs) {
            let batch: Vec<TtsSample> = chunk.iter().map(|&i| lab[i]).collect();
            model.zero_grad();
            let mut loss = accumulate(&mut model, &batch, 1.0, false)?;
            if let Some(uchunk) = unl_chunks.next() {
                let ubatch: Vec<TtsSample> = uchunk.iter().map(|&i| unl[i]).collect();
                loss += accumulate(&mut model, &ubatch, 1.0, true)?;
            }
            opt.step(&mut model, state.lr);
            epoch_loss += loss;
            batches += 1;
        }
        let epoch = state.epoch + 1;
        let dl = dev_loss(&model, &dev_samples)?;
        log.record(epoch, "tts_train", "loss", epoch_loss / batches as f64)?;
        log.record(epoch, "tts_dev", "loss", dl)?;
        log.record(epoch, "tts_train", "lr", state.lr)?;
        log::info!("tts epoch {epoch}: loss {:.4} dev loss {dl:.4} lr {}", epoch_loss / batches as f64, state.lr);
        let verdict = state.observe(dl);
        if verdict == Verdict::Improved || (verdict == Verdict::Stop && state.bad_epochs == 0) {
            best = model.clone();
        }
        if verdict == Verdict::Stop {
            break;
        }
    }
    Ok(TtsTraining {
        model: best,
        pseudo_transcripts,
    })
}
