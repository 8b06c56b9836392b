use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{FeatureSequence, SpeakerEmbedding, TokenSequence, DEFAULT_EMBEDDING_DIM, SOS_EOS, VOCAB_SIZE};
use crate::error::{Error, Result};
use crate::nn::attention::AttendCache;
use crate::nn::lstm::{BiLstmCache, LstmStep};
use crate::nn::ops::{sigmoid, softplus, Mat};
use crate::nn::{AdditiveAttention, BiLstm, Linear, LstmCell, Param, Parameterized};

pub const FRAMES_PER_STEP: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct TtsConfig {
    pub feature_dim: usize,
    pub speaker_dim: usize,
    pub embedding: usize,
    /// Hidden units per direction of the token encoder.
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub attention: usize,
    pub frames_per_step: usize,
    pub init_range: f64,
}

impl Default for TtsConfig {
    fn default() -> Self {
        Self {
            feature_dim: 20,
            speaker_dim: DEFAULT_EMBEDDING_DIM,
            embedding: 16,
            encoder_hidden: 32,
            decoder_hidden: 64,
            attention: 32,
            frames_per_step: FRAMES_PER_STEP,
            init_range: 0.1,
        }
    }
}

impl TtsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames_per_step != FRAMES_PER_STEP {
            return Err(Error::InvalidArgument(format!("frames_per_step must be {FRAMES_PER_STEP}")));
        }
        let sizes = [
            self.feature_dim,
            self.speaker_dim,
            self.embedding,
            self.encoder_hidden,
            self.decoder_hidden,
            self.attention,
        ];
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument("all layer sizes must be at least 1".into()));
        }
        Ok(())
    }

    fn memory_dim(&self) -> usize {
        2 * self.encoder_hidden + self.speaker_dim
    }
}

/// Teacher-forced synthesis output. `frames` has the even-padded length; the
/// last `frames.rows - real_len` rows (zero or one) are padding.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePrediction {
    pub frames: Mat,
    pub stop_probs: Vec<f64>,
    stop_logits: Vec<f64>,
    pub real_len: usize,
}

impl FramePrediction {
    pub fn len(&self) -> usize {
        self.frames.rows
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows == 0
    }

    pub fn is_padding(&self, s: usize) -> bool {
        s >= self.real_len
    }

    /// Predicted frames without the padding row.
    pub fn real_frames(&self) -> FeatureSequence {
        let mut m = Mat::zeros(self.real_len, self.frames.cols);
        m.data.copy_from_slice(&self.frames.data[..self.real_len * self.frames.cols]);
        FeatureSequence::new(m).expect("finite predictions")
    }
}

/// Token encoder (embedding + bidirectional LSTM) whose outputs are
/// concatenated with the speaker embedding to form the attention memory, and
/// an LSTM decoder that emits two frames and two stop logits per step from
/// `[h; context]`. The decoder input is `[previous two frames; previous
/// context]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TtsModel {
    pub config: TtsConfig,
    pub embedding: Param,
    pub encoder: BiLstm,
    pub attention: AdditiveAttention,
    pub decoder: LstmCell,
    pub frame_out: Linear,
    pub stop_out: Linear,
}

struct StepCache {
    lstm: LstmStep,
    att: AttendCache,
    out_in: Vec<f64>,
}

struct ForwardCache {
    inputs: Vec<usize>,
    encoder: BiLstmCache,
    memory: crate::nn::AttentionMemory,
    steps: Vec<StepCache>,
}

/// Reference padded to an even number of frames by repeating the last one.
fn padded_reference(reference: &FeatureSequence) -> Mat {
    let s = reference.len();
    let f = reference.dim();
    let s_pad = s + s % 2;
    let mut m = Mat::zeros(s_pad, f);
    m.data[..s * f].copy_from_slice(&reference.mat().data);
    if s_pad > s {
        m.row_mut(s).copy_from_slice(reference.frame(s - 1));
    }
    m
}

/// Stop targets: 1 at the last real frame and at any padding frame.
pub fn stop_targets(real_len: usize, padded_len: usize) -> Vec<f64> {
    (0..padded_len).map(|s| if s + 1 >= real_len { 1.0 } else { 0.0 }).collect()
}

impl TtsModel {
    pub fn new(config: TtsConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = config.init_range;
        let mem = config.memory_dim();
        let step_frames = config.frames_per_step * config.feature_dim;
        Ok(Self {
            embedding: Param::uniform("tts.embedding", VOCAB_SIZE, config.embedding, init, &mut rng),
            encoder: BiLstm::new("tts.encoder", config.embedding, config.encoder_hidden, init, &mut rng),
            attention: AdditiveAttention::new("tts.attention", mem, config.decoder_hidden, config.attention, init, &mut rng),
            decoder: LstmCell::new("tts.decoder", step_frames + mem, config.decoder_hidden, init, &mut rng),
            frame_out: Linear::new("tts.frame_out", config.decoder_hidden + mem, step_frames, init, &mut rng),
            stop_out: Linear::new("tts.stop_out", config.decoder_hidden + mem, config.frames_per_step, init, &mut rng),
            config,
        })
    }

    fn check_inputs(&self, tokens: &TokenSequence, spk: &SpeakerEmbedding, reference: &FeatureSequence) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("TTS input tokens are empty".into()));
        }
        if spk.dim() != self.config.speaker_dim {
            return Err(Error::InvalidArgument(format!(
                "speaker embedding has {} dims, model expects {}",
                spk.dim(),
                self.config.speaker_dim
            )));
        }
        if reference.dim() != self.config.feature_dim {
            return Err(Error::InvalidArgument(format!(
                "reference has {} bins, model expects {}",
                reference.dim(),
                self.config.feature_dim
            )));
        }
        Ok(())
    }

    fn forward(&self, tokens: &TokenSequence, spk: &SpeakerEmbedding, reference: &FeatureSequence) -> (FramePrediction, ForwardCache) {
        let cfg = &self.config;
        let e = cfg.embedding;
        // The encoder reads the tokens followed by sos/eos.
        let mut inputs = tokens.ids().to_vec();
        inputs.push(SOS_EOS);
        let mut emb = Mat::zeros(inputs.len(), e);
        for (r, &tok) in inputs.iter().enumerate() {
            emb.row_mut(r).copy_from_slice(&self.embedding.value[tok * e..(tok + 1) * e]);
        }
        let (enc, encoder) = self.encoder.forward(&emb);
        let enc_dim = enc.cols;
        let mut keys = Mat::zeros(enc.rows, cfg.memory_dim());
        for r in 0..enc.rows {
            let row = keys.row_mut(r);
            row[..enc_dim].copy_from_slice(enc.row(r));
            row[enc_dim..].copy_from_slice(spk.as_slice());
        }
        let memory = self.attention.prepare(keys);

        let target = padded_reference(reference);
        let f = cfg.feature_dim;
        let per = cfg.frames_per_step;
        let n_steps = target.rows / per;
        let mut frames = Mat::zeros(target.rows, f);
        let mut stop_logits = Vec::with_capacity(target.rows);
        let mut steps = Vec::with_capacity(n_steps);
        let mut h = vec![0.0; cfg.decoder_hidden];
        let mut c = vec![0.0; cfg.decoder_hidden];
        let mut ctx = vec![0.0; cfg.memory_dim()];
        for k in 0..n_steps {
            let mut input = vec![0.0; per * f];
            if k > 0 {
                input.copy_from_slice(&target.data[(k - 1) * per * f..k * per * f]);
            }
            input.extend_from_slice(&ctx);
            let (h2, c2, lstm) = self.decoder.step(&input, &h, &c);
            let (ctx2, att) = self.attention.attend(&memory, &h2);
            let mut out_in = h2.clone();
            out_in.extend_from_slice(&ctx2);
            let out = self.frame_out.forward(&out_in);
            frames.data[k * per * f..(k + 1) * per * f].copy_from_slice(&out);
            stop_logits.extend(self.stop_out.forward(&out_in));
            steps.push(StepCache { lstm, att, out_in });
            h = h2;
            c = c2;
            ctx = ctx2;
        }
        let pred = FramePrediction {
            frames,
            stop_probs: stop_logits.iter().map(|&z| sigmoid(z)).collect(),
            stop_logits,
            real_len: reference.len(),
        };
        (
            pred,
            ForwardCache {
                inputs,
                encoder,
                memory,
                steps,
            },
        )
    }

    /// Decodes with the reference frames (not the model's own outputs) as the
    /// autoregressive input, two frames per step.
    pub fn teacher_forced(
        &self,
        tokens: &TokenSequence,
        spk: &SpeakerEmbedding,
        reference: &FeatureSequence,
    ) -> Result<FramePrediction> {
        self.check_inputs(tokens, spk, reference)?;
        Ok(self.forward(tokens, spk, reference).0)
    }

    /// Per-utterance loss; adds `grad_scale · ∂L/∂θ` into the gradients.
    pub(crate) fn loss_and_backward(
        &mut self,
        tokens: &TokenSequence,
        spk: &SpeakerEmbedding,
        reference: &FeatureSequence,
        grad_scale: f64,
    ) -> Result<f64> {
        self.check_inputs(tokens, spk, reference)?;
        let (pred, cache) = self.forward(tokens, spk, reference);
        let target = padded_reference(reference);
        let s_pad = pred.len();
        let real = pred.real_len;
        let stops = stop_targets(real, s_pad);
        let f = self.config.feature_dim;
        let norm = 1.0 / s_pad as f64;

        let mut loss = 0.0;
        let mut d_frames = Mat::zeros(s_pad, f);
        let mut d_stop = vec![0.0; s_pad];
        for s in 0..s_pad {
            if s < real {
                for (j, (&p, &x)) in pred.frames.row(s).iter().zip(target.row(s)).enumerate() {
                    let diff = p - x;
                    loss += norm * diff * diff;
                    d_frames.row_mut(s)[j] = grad_scale * norm * 2.0 * diff;
                }
            }
            let z = pred.stop_logits[s];
            // −[b log σ(z) + (1−b) log(1−σ(z))] = softplus(z) − b·z
            loss += norm * (softplus(z) - stops[s] * z);
            d_stop[s] = grad_scale * norm * (pred.stop_probs[s] - stops[s]);
        }
        if grad_scale != 0.0 {
            self.backward(&cache, &d_frames, &d_stop);
        }
        Ok(loss)
    }

    fn backward(&mut self, cache: &ForwardCache, d_frames: &Mat, d_stop: &[f64]) {
        let cfg = self.config.clone();
        let per = cfg.frames_per_step;
        let f = cfg.feature_dim;
        let hd = cfg.decoder_hidden;
        let mem_dim = cfg.memory_dim();
        let mut dmem = self.attention.zero_memory_grad(&cache.memory);
        let mut dh_carry = vec![0.0; hd];
        let mut dc_carry = vec![0.0; hd];
        let mut dctx_carry = vec![0.0; mem_dim];
        for k in (0..cache.steps.len()).rev() {
            let step = &cache.steps[k];
            let mut d_out_in = vec![0.0; hd + mem_dim];
            let df = &d_frames.data[k * per * f..(k + 1) * per * f];
            self.frame_out.backward(&step.out_in, df, Some(&mut d_out_in));
            self.stop_out.backward(&step.out_in, &d_stop[k * per..(k + 1) * per], Some(&mut d_out_in));
            let mut dh: Vec<f64> = d_out_in[..hd].iter().zip(&dh_carry).map(|(a, b)| a + b).collect();
            let dctx: Vec<f64> = d_out_in[hd..].iter().zip(&dctx_carry).map(|(a, b)| a + b).collect();
            self.attention.attend_backward(&cache.memory, &step.att, &dctx, &mut dh, &mut dmem);
            let (dxh, dc_prev) = self.decoder.step_backward(&step.lstm, &dh, &dc_carry);
            // Reference frames carry no gradient; only the context part feeds back.
            let off = per * f;
            dctx_carry.copy_from_slice(&dxh[off..off + mem_dim]);
            dh_carry.copy_from_slice(&dxh[off + mem_dim..]);
            dc_carry = dc_prev;
        }
        self.attention.memory_backward(&cache.memory, &mut dmem);
        let enc_dim = 2 * cfg.encoder_hidden;
        let mut d_enc = Mat::zeros(dmem.keys.rows, enc_dim);
        for r in 0..d_enc.rows {
            d_enc.row_mut(r).copy_from_slice(&dmem.keys.row(r)[..enc_dim]);
        }
        let d_emb = self.encoder.backward(&cache.encoder, &d_enc, true).expect("requested input gradient");
        let e = cfg.embedding;
        for (r, &tok) in cache.inputs.iter().enumerate() {
            let row = &mut self.embedding.grad[tok * e..(tok + 1) * e];
            row.iter_mut().zip(d_emb.row(r)).for_each(|(g, d)| *g += d);
        }
    }
}

impl Parameterized for TtsModel {
    fn visit(&self, f: &mut dyn FnMut(&Param)) {
        f(&self.embedding);
        self.encoder.visit(f);
        self.attention.visit(f);
        self.decoder.visit(f);
        self.frame_out.visit(f);
        self.stop_out.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.embedding);
        self.encoder.visit_mut(f);
        self.attention.visit_mut(f);
        self.decoder.visit_mut(f);
        self.frame_out.visit_mut(f);
        self.stop_out.visit_mut(f);
    }
}

/// Reference form of the frame loss on probabilities:
/// `(1/S) Σ_s [ m_s·‖x_s − x̂_s‖² − (b_s ln b̂_s + (1 − b_s) ln(1 − b̂_s)) ]`
/// where `m_s` masks padding frames out of the squared-error term.
pub fn frame_loss(predicted: &Mat, stop_probs: &[f64], target: &Mat, stop_targets: &[f64], mask: &[bool]) -> f64 {
    let s_len = predicted.rows;
    let mut total = 0.0;
    for s in 0..s_len {
        if mask[s] {
            total += predicted
                .row(s)
                .iter()
                .zip(target.row(s))
                .map(|(p, x)| (x - p) * (x - p))
                .sum::<f64>();
        }
        let (b, p) = (stop_targets[s], stop_probs[s]);
        total -= b * p.ln() + (1.0 - b) * (1.0 - p).ln();
    }
    total / s_len as f64
}
