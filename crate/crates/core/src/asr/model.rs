use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{FeatureSequence, SOS_EOS, VOCAB_SIZE};
use crate::error::{Error, Result};
use crate::nn::attention::{AttendCache, AttentionMemory};
use crate::nn::lstm::{BiLstmCache, LstmStep};
use crate::nn::ops::{log_softmax, softmax, Mat};
use crate::nn::{AdditiveAttention, BiLstm, Linear, LstmCell, Param, Parameterized};

pub const SUBSAMPLE_FACTOR: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct AsrConfig {
    pub feature_dim: usize,
    pub encoder_layers: usize,
    /// Hidden units per direction in each encoder layer.
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub embedding: usize,
    pub attention: usize,
    pub vocab_size: usize,
    pub init_range: f64,
}

impl Default for AsrConfig {
    fn default() -> Self {
        Self {
            feature_dim: 20,
            encoder_layers: 2,
            encoder_hidden: 64,
            decoder_hidden: 128,
            embedding: 32,
            attention: 64,
            vocab_size: VOCAB_SIZE,
            init_range: 0.1,
        }
    }
}

impl AsrConfig {
    pub fn validate(&self) -> Result<()> {
        // Two halving layers are needed for the factor-four reduction.
        if self.encoder_layers < 2 {
            return Err(Error::InvalidArgument("encoder_layers must be at least 2".into()));
        }
        if self.vocab_size != VOCAB_SIZE {
            return Err(Error::InvalidArgument(format!("vocab_size must be {VOCAB_SIZE}")));
        }
        let sizes = [self.feature_dim, self.encoder_hidden, self.decoder_hidden, self.embedding, self.attention];
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument("all layer sizes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn encoder_output(&self) -> usize {
        2 * self.encoder_hidden
    }
}

/// Subsampled length after the two halving layers: `ceil(ceil(S/2)/2)`.
pub fn subsampled_len(frames: usize) -> usize {
    frames.div_ceil(2).div_ceil(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Base,
    Teacher,
    Student,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Base => "base",
            Role::Teacher => "teacher",
            Role::Student => "student",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "base" => Some(Role::Base),
            "teacher" => Some(Role::Teacher),
            "student" => Some(Role::Student),
            _ => None,
        }
    }
}

/// Encoder output `h^e`, one row per subsampled frame.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderStates(pub Mat);

impl EncoderStates {
    pub fn len(&self) -> usize {
        self.0.rows
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows == 0
    }
}

/// Attention-based encoder–decoder: stacked bidirectional LSTMs (the last two
/// keep every even-indexed output frame), and an LSTM decoder fed with
/// `[embedding(prev token); previous context]` whose output layer sees
/// `[h; context]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AsrModel {
    pub config: AsrConfig,
    pub role: Role,
    pub encoder: Vec<BiLstm>,
    pub embedding: Param,
    pub decoder: LstmCell,
    pub attention: AdditiveAttention,
    pub output: Linear,
}

#[derive(Clone, Debug)]
pub struct DecoderState {
    h: Vec<f64>,
    c: Vec<f64>,
    ctx: Vec<f64>,
}

struct EncoderCache {
    layers: Vec<(BiLstmCache, usize)>,
}

struct StepCache {
    token: usize,
    lstm: LstmStep,
    att: AttendCache,
    out_in: Vec<f64>,
}

impl AsrModel {
    pub fn new(config: AsrConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = config.init_range;
        let enc_out = config.encoder_output();
        let encoder = (0..config.encoder_layers)
            .map(|l| {
                let input = if l == 0 { config.feature_dim } else { enc_out };
                BiLstm::new(&format!("encoder.{l}"), input, config.encoder_hidden, init, &mut rng)
            })
            .collect();
        let embedding = Param::uniform("decoder.embedding", config.vocab_size, config.embedding, init, &mut rng);
        let decoder = LstmCell::new("decoder.lstm", config.embedding + enc_out, config.decoder_hidden, init, &mut rng);
        let attention = AdditiveAttention::new(
            "decoder.attention",
            enc_out,
            config.decoder_hidden,
            config.attention,
            init,
            &mut rng,
        );
        let output = Linear::new(
            "decoder.output",
            config.decoder_hidden + enc_out,
            config.vocab_size,
            init,
            &mut rng,
        );
        Ok(Self {
            config,
            role: Role::Base,
            encoder,
            embedding,
            decoder,
            attention,
            output,
        })
    }

    /// Deep copy carrying a different role tag.
    pub fn with_role(&self, role: Role) -> Self {
        let mut m = self.clone();
        m.role = role;
        m
    }

    fn subsamples(&self, layer: usize) -> bool {
        layer + 2 >= self.encoder.len()
    }

    pub fn encode(&self, features: &FeatureSequence) -> EncoderStates {
        self.encode_cached(features).0
    }

    fn encode_cached(&self, features: &FeatureSequence) -> (EncoderStates, EncoderCache) {
        let mut x = features.mat().clone();
        let mut layers = Vec::with_capacity(self.encoder.len());
        for (l, layer) in self.encoder.iter().enumerate() {
            let (out, cache) = layer.forward(&x);
            let n = out.rows;
            x = if self.subsamples(l) { keep_even_rows(&out) } else { out };
            layers.push((cache, n));
        }
        (EncoderStates(x), EncoderCache { layers })
    }

    fn encode_backward(&mut self, cache: &EncoderCache, d_states: Mat) {
        let mut d = d_states;
        for l in (0..self.encoder.len()).rev() {
            let (layer_cache, n) = &cache.layers[l];
            let d_full = if self.subsamples(l) { spread_even_rows(&d, *n) } else { d };
            match self.encoder[l].backward(layer_cache, &d_full, l > 0) {
                Some(dx) => d = dx,
                None => break,
            }
        }
    }

    pub fn memory(&self, states: &EncoderStates) -> AttentionMemory {
        self.attention.prepare(states.0.clone())
    }

    pub fn initial_state(&self) -> DecoderState {
        DecoderState {
            h: vec![0.0; self.config.decoder_hidden],
            c: vec![0.0; self.config.decoder_hidden],
            ctx: vec![0.0; self.config.encoder_output()],
        }
    }

    fn step_cached(&self, mem: &AttentionMemory, state: &DecoderState, token: usize) -> (DecoderState, Vec<f64>, StepCache) {
        let e = self.config.embedding;
        let mut input = Vec::with_capacity(e + state.ctx.len());
        input.extend_from_slice(&self.embedding.value[token * e..(token + 1) * e]);
        input.extend_from_slice(&state.ctx);
        let (h, c, lstm) = self.decoder.step(&input, &state.h, &state.c);
        let (ctx, att) = self.attention.attend(mem, &h);
        let mut out_in = h.clone();
        out_in.extend_from_slice(&ctx);
        let logits = self.output.forward(&out_in);
        (
            DecoderState { h, c, ctx },
            logits,
            StepCache {
                token,
                lstm,
                att,
                out_in,
            },
        )
    }

    /// Advances the decoder by one input token; returns the new state and the
    /// log-distribution over the next token.
    pub fn step(&self, mem: &AttentionMemory, state: &DecoderState, token: usize) -> (DecoderState, Vec<f64>) {
        let (s, logits, _) = self.step_cached(mem, state, token);
        (s, log_softmax(&logits))
    }

    /// Attention weights of the step that consumes `token`.
    pub fn attention_weights(&self, mem: &AttentionMemory, state: &DecoderState, token: usize) -> Vec<f64> {
        self.step_cached(mem, state, token).2.att.weights
    }

    /// Log-distributions after each input token, teacher forced.
    pub fn forced_log_probs(&self, mem: &AttentionMemory, inputs: &[usize]) -> Vec<Vec<f64>> {
        let mut state = self.initial_state();
        inputs
            .iter()
            .map(|&tok| {
                let (s, lp) = self.step(mem, &state, tok);
                state = s;
                lp
            })
            .collect()
    }

    /// Returns `L = Σ_t w_t · (−log p(targets_t | inputs_{..=t}, x))` and adds
    /// `grad_scale · ∂L/∂θ` into the parameter gradients. When every weight
    /// (or the scale) is zero the backward pass is skipped entirely.
    pub fn weighted_nll(
        &mut self,
        features: &FeatureSequence,
        inputs: &[usize],
        targets: &[usize],
        weights: &[f64],
        grad_scale: f64,
    ) -> f64 {
        assert_eq!(inputs.len(), targets.len());
        assert_eq!(inputs.len(), weights.len());
        let (states, enc_cache) = self.encode_cached(features);
        let mem = self.memory(&states);
        let mut state = self.initial_state();
        let mut caches = Vec::with_capacity(inputs.len());
        let mut probs = Vec::with_capacity(inputs.len());
        let mut loss = 0.0;
        for t in 0..inputs.len() {
            let (s, logits, cache) = self.step_cached(&mem, &state, inputs[t]);
            let lp = log_softmax(&logits);
            if weights[t] != 0.0 {
                loss -= weights[t] * lp[targets[t]];
            }
            probs.push(softmax(&logits));
            caches.push(cache);
            state = s;
        }
        if grad_scale == 0.0 || weights.iter().all(|&w| w == 0.0) {
            return loss;
        }

        let e = self.config.embedding;
        let hd = self.config.decoder_hidden;
        let ctx_dim = self.config.encoder_output();
        let mut dmem = self.attention.zero_memory_grad(&mem);
        let mut dh_carry = vec![0.0; hd];
        let mut dc_carry = vec![0.0; hd];
        let mut dctx_carry = vec![0.0; ctx_dim];
        for t in (0..inputs.len()).rev() {
            let cache = &caches[t];
            let mut dlogits = probs[t].clone();
            dlogits[targets[t]] -= 1.0;
            dlogits.iter_mut().for_each(|g| *g *= grad_scale * weights[t]);
            let mut d_out_in = vec![0.0; hd + ctx_dim];
            self.output.backward(&cache.out_in, &dlogits, Some(&mut d_out_in));
            let mut dh: Vec<f64> = d_out_in[..hd].iter().zip(&dh_carry).map(|(a, b)| a + b).collect();
            let dctx: Vec<f64> = d_out_in[hd..].iter().zip(&dctx_carry).map(|(a, b)| a + b).collect();
            self.attention.attend_backward(&mem, &cache.att, &dctx, &mut dh, &mut dmem);
            let (dxh, dc_prev) = self.decoder.step_backward(&cache.lstm, &dh, &dc_carry);
            let row = &mut self.embedding.grad[cache.token * e..(cache.token + 1) * e];
            row.iter_mut().zip(&dxh[..e]).for_each(|(g, d)| *g += d);
            dctx_carry.copy_from_slice(&dxh[e..e + ctx_dim]);
            dh_carry.copy_from_slice(&dxh[e + ctx_dim..]);
            dc_carry = dc_prev;
        }
        self.attention.memory_backward(&mem, &mut dmem);
        self.encode_backward(&enc_cache, dmem.keys);
        loss
    }

    /// Default decoding bound `2·S′ + 10`.
    pub fn default_max_len(&self, features: &FeatureSequence) -> usize {
        2 * subsampled_len(features.len()) + 10
    }
}

/// `[sos, t_1, ..., t_{T-1}]` for targets `t_1..t_T`.
pub fn teacher_inputs(targets: &[usize]) -> Vec<usize> {
    let mut inputs = Vec::with_capacity(targets.len());
    inputs.push(SOS_EOS);
    inputs.extend_from_slice(&targets[..targets.len().saturating_sub(1)]);
    inputs.truncate(targets.len());
    inputs
}

fn keep_even_rows(m: &Mat) -> Mat {
    let rows = m.rows.div_ceil(2);
    let mut out = Mat::zeros(rows, m.cols);
    for r in 0..rows {
        out.row_mut(r).copy_from_slice(m.row(2 * r));
    }
    out
}

fn spread_even_rows(d: &Mat, n: usize) -> Mat {
    let mut out = Mat::zeros(n, d.cols);
    for r in 0..d.rows {
        out.row_mut(2 * r).copy_from_slice(d.row(r));
    }
    out
}

impl Parameterized for AsrModel {
    fn visit(&self, f: &mut dyn FnMut(&Param)) {
        for layer in &self.encoder {
            layer.visit(f);
        }
        f(&self.embedding);
        self.decoder.visit(f);
        self.attention.visit(f);
        self.output.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for layer in &mut self.encoder {
            layer.visit_mut(f);
        }
        f(&mut self.embedding);
        self.decoder.visit_mut(f);
        self.attention.visit_mut(f);
        self.output.visit_mut(f);
    }
}
