use std::cmp::Ordering;

use super::model::{teacher_inputs, AsrModel, DecoderState, EncoderStates};
use crate::corpus::{FeatureSequence, TokenSequence, SOS_EOS};
use crate::error::{Error, Result};
use crate::nn::ops::argmax;
use crate::nn::AttentionMemory;
use crate::nn::Parameterized;

/// A decoded sequence with its total log-probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub ids: TokenSequence,
    pub log_prob: f64,
}

pub fn encode(model: &AsrModel, features: &FeatureSequence) -> EncoderStates {
    model.encode(features)
}

/// `p(· | prefix, x)`; `prefix` must start with sos/eos.
pub fn decode_step(model: &AsrModel, enc: &EncoderStates, prefix: &TokenSequence) -> Result<Vec<f64>> {
    match prefix.ids().first() {
        None => return Err(Error::InvalidArgument("decoder prefix is empty".into())),
        Some(&first) if first != SOS_EOS => {
            return Err(Error::InvalidArgument("decoder prefix must start with sos/eos".into()))
        }
        _ => {}
    }
    let mem = model.memory(enc);
    let lp = model.forced_log_probs(&mem, prefix.ids()).pop().unwrap();
    Ok(lp.into_iter().map(f64::exp).collect())
}

fn check_targets(tokens: &TokenSequence) -> Result<()> {
    if !tokens.ends_with_eos() {
        return Err(Error::InvalidArgument("target sequence must end with sos/eos".into()));
    }
    Ok(())
}

/// `Σ_t log p(y_t | y_{1:t-1}, x)` with teacher-forced prefixes.
pub fn sequence_log_prob(model: &AsrModel, features: &FeatureSequence, tokens: &TokenSequence) -> Result<f64> {
    check_targets(tokens)?;
    let mem = model.memory(&model.encode(features));
    let lps = model.forced_log_probs(&mem, &teacher_inputs(tokens.ids()));
    Ok(tokens.ids().iter().zip(&lps).map(|(&y, lp)| lp[y]).sum())
}

/// Accumulates the gradient of `scale · mean_batch(−(1/T) Σ_t log p)` into
/// the model without zeroing first; returns the unscaled batch loss.
pub fn accumulate_supervised(model: &mut AsrModel, batch: &[(&FeatureSequence, &TokenSequence)], scale: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for (_, y) in batch {
        check_targets(y)?;
    }
    let n = batch.len() as f64;
    let mut total = 0.0;
    for (x, y) in batch {
        let w = vec![1.0 / (n * y.len() as f64); y.len()];
        total += model.weighted_nll(x, &teacher_inputs(y.ids()), y.ids(), &w, scale);
    }
    Ok(total)
}

/// Mean over the batch of `−(1/T) Σ_t log p(y_t | y_{1:t-1}, x)`.
/// Gradients are reset and then populated for every parameter.
pub fn supervised_loss(model: &mut AsrModel, batch: &[(&FeatureSequence, &TokenSequence)]) -> Result<f64> {
    model.zero_grad();
    accumulate_supervised(model, batch, 1.0)
}

/// Stepwise argmax; ties go to the smaller id. Stops after emitting sos/eos or
/// after `max_len` tokens.
pub fn greedy_decode(model: &AsrModel, features: &FeatureSequence, max_len: usize) -> Hypothesis {
    let mem = model.memory(&model.encode(features));
    greedy_from_memory(model, &mem, max_len)
}

pub fn greedy_from_memory(model: &AsrModel, mem: &AttentionMemory, max_len: usize) -> Hypothesis {
    let mut state = model.initial_state();
    let mut prev = SOS_EOS;
    let mut ids = Vec::new();
    let mut log_prob = 0.0;
    for _ in 0..max_len {
        let (s, lp) = model.step(mem, &state, prev);
        let tok = argmax(&lp);
        log_prob += lp[tok];
        ids.push(tok);
        if tok == SOS_EOS {
            break;
        }
        state = s;
        prev = tok;
    }
    Hypothesis {
        ids: TokenSequence(ids),
        log_prob,
    }
}

struct Live {
    ids: Vec<usize>,
    log_prob: f64,
    state: DecoderState,
}

/// Higher log-probability first, then lexicographically smaller ids.
fn rank(a_lp: f64, a_ids: &[usize], b_lp: f64, b_ids: &[usize]) -> Ordering {
    b_lp.partial_cmp(&a_lp).unwrap_or(Ordering::Equal).then_with(|| a_ids.cmp(b_ids))
}

/// Length-unnormalized beam search. Each step keeps the best `beam`
/// expansions of the live hypotheses; expansions ending in sos/eos (or
/// reaching `max_len`) are finished and leave the beam.
pub fn beam_decode(model: &AsrModel, features: &FeatureSequence, beam: usize, max_len: usize) -> Hypothesis {
    let mem = model.memory(&model.encode(features));
    beam_from_memory(model, &mem, beam, max_len)
}

pub fn beam_from_memory(model: &AsrModel, mem: &AttentionMemory, beam: usize, max_len: usize) -> Hypothesis {
    assert!(beam >= 1, "beam must be at least 1");
    let mut live = vec![Live {
        ids: Vec::new(),
        log_prob: 0.0,
        state: model.initial_state(),
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for step in 0..max_len {
        let mut next_states = Vec::with_capacity(live.len());
        let mut cands: Vec<(f64, Vec<usize>, usize)> = Vec::with_capacity(live.len() * model.config.vocab_size);
        for (bi, hyp) in live.iter().enumerate() {
            let prev = hyp.ids.last().copied().unwrap_or(SOS_EOS);
            let (s, lp) = model.step(mem, &hyp.state, prev);
            next_states.push(s);
            for (tok, &l) in lp.iter().enumerate() {
                let mut ids = hyp.ids.clone();
                ids.push(tok);
                cands.push((hyp.log_prob + l, ids, bi));
            }
        }
        cands.sort_by(|a, b| rank(a.0, &a.1, b.0, &b.1));
        cands.truncate(beam);
        let last_step = step + 1 == max_len;
        live = Vec::with_capacity(beam);
        for (log_prob, ids, parent) in cands {
            if ids.last() == Some(&SOS_EOS) || last_step {
                finished.push(Hypothesis {
                    ids: TokenSequence(ids),
                    log_prob,
                });
            } else {
                live.push(Live {
                    ids,
                    log_prob,
                    state: next_states[parent].clone(),
                });
            }
        }
        if live.is_empty() {
            break;
        }
    }
    finished
        .into_iter()
        .min_by(|a, b| rank(a.log_prob, a.ids.ids(), b.log_prob, b.ids.ids()))
        .unwrap_or(Hypothesis {
            ids: TokenSequence(Vec::new()),
            log_prob: 0.0,
        })
}

/// Pseudo transcript: beam-4 decode with the trailing sos/eos removed.
pub fn transcribe(model: &AsrModel, features: &FeatureSequence) -> TokenSequence {
    beam_decode(model, features, PSEUDO_BEAM, model.default_max_len(features)).ids.without_eos()
}

pub const PSEUDO_BEAM: usize = 4;
