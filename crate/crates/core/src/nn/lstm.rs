//! LSTM cells and bidirectional sequence layers with hand-written BPTT.
//!
//! Gate formulation (no peepholes), with `[x; h]` the concatenated input:
//!
//! ```text
//! i = σ(W_i [x; h] + b_i)      f = σ(W_f [x; h] + b_f)
//! g = tanh(W_g [x; h] + b_g)   o = σ(W_o [x; h] + b_o)
//! c' = f ⊙ c + i ⊙ g           h' = o ⊙ tanh(c')
//! ```
//!
//! The four gate blocks are stacked in one `4H × (in + H)` weight in the order
//! `i, f, g, o`.

use rand::Rng;

use super::linear::Linear;
use super::ops::{sigmoid, Mat};
use super::param::{Param, Parameterized};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell {
    pub lin: Linear,
    input: usize,
    hidden: usize,
}

/// Activations saved by one forward step for backpropagation.
#[derive(Clone, Debug)]
pub struct LstmStep {
    xh: Vec<f64>,
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCell {
    pub fn new<R: Rng>(name: &str, input: usize, hidden: usize, init: f64, rng: &mut R) -> Self {
        Self {
            lin: Linear::new(name, input + hidden, 4 * hidden, init, rng),
            input,
            hidden,
        }
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    /// One step; returns `(h', c', cache)`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>, LstmStep) {
        let hs = self.hidden;
        let mut xh = Vec::with_capacity(self.input + hs);
        xh.extend_from_slice(x);
        xh.extend_from_slice(h);
        let mut gates = self.lin.forward(&xh);
        for k in 0..hs {
            gates[k] = sigmoid(gates[k]);
            gates[hs + k] = sigmoid(gates[hs + k]);
            gates[2 * hs + k] = gates[2 * hs + k].tanh();
            gates[3 * hs + k] = sigmoid(gates[3 * hs + k]);
        }
        let mut c_new = vec![0.0; hs];
        let mut h_new = vec![0.0; hs];
        let mut tanh_c = vec![0.0; hs];
        for k in 0..hs {
            c_new[k] = gates[hs + k] * c[k] + gates[k] * gates[2 * hs + k];
            tanh_c[k] = c_new[k].tanh();
            h_new[k] = gates[3 * hs + k] * tanh_c[k];
        }
        let cache = LstmStep {
            xh,
            gates,
            c_prev: c.to_vec(),
            tanh_c,
        };
        (h_new, c_new, cache)
    }

    /// Backward through one step given the gradients reaching `h'` and `c'`.
    ///
    /// Returns `(d[x; h], dc)`.
    pub fn step_backward(&mut self, cache: &LstmStep, dh: &[f64], dc: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hs = self.hidden;
        let g = &cache.gates;
        let mut dpre = vec![0.0; 4 * hs];
        let mut dc_prev = vec![0.0; hs];
        for k in 0..hs {
            let (i, f, gg, o) = (g[k], g[hs + k], g[2 * hs + k], g[3 * hs + k]);
            let tc = cache.tanh_c[k];
            let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
            let do_ = dh[k] * tc;
            let di = dct * gg;
            let dg = dct * i;
            let df = dct * cache.c_prev[k];
            dc_prev[k] = dct * f;
            dpre[k] = di * i * (1.0 - i);
            dpre[hs + k] = df * f * (1.0 - f);
            dpre[2 * hs + k] = dg * (1.0 - gg * gg);
            dpre[3 * hs + k] = do_ * o * (1.0 - o);
        }
        let mut dxh = vec![0.0; self.input + hs];
        self.lin.backward(&cache.xh, &dpre, Some(&mut dxh));
        (dxh, dc_prev)
    }
}

impl Parameterized for LstmCell {
    fn visit(&self, f: &mut dyn FnMut(&Param)) {
        self.lin.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.lin.visit_mut(f);
    }
}

/// Bidirectional LSTM over a whole sequence; output rows are `[h_fwd; h_bwd]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

#[derive(Clone, Debug)]
pub struct BiLstmCache {
    fwd: Vec<LstmStep>,
    bwd: Vec<LstmStep>,
}

impl BiLstm {
    pub fn new<R: Rng>(name: &str, input: usize, hidden: usize, init: f64, rng: &mut R) -> Self {
        Self {
            fwd: LstmCell::new(&format!("{name}.fwd"), input, hidden, init, rng),
            bwd: LstmCell::new(&format!("{name}.bwd"), input, hidden, init, rng),
        }
    }

    pub fn output_size(&self) -> usize {
        2 * self.fwd.hidden_size()
    }

    pub fn forward(&self, xs: &Mat) -> (Mat, BiLstmCache) {
        let n = xs.rows;
        let hs = self.fwd.hidden_size();
        let mut out = Mat::zeros(n, 2 * hs);
        let mut fwd = Vec::with_capacity(n);
        let (mut h, mut c) = (vec![0.0; hs], vec![0.0; hs]);
        for t in 0..n {
            let (h2, c2, cache) = self.fwd.step(xs.row(t), &h, &c);
            out.row_mut(t)[..hs].copy_from_slice(&h2);
            fwd.push(cache);
            h = h2;
            c = c2;
        }
        let mut bwd: Vec<Option<LstmStep>> = vec![None; n];
        let (mut h, mut c) = (vec![0.0; hs], vec![0.0; hs]);
        for t in (0..n).rev() {
            let (h2, c2, cache) = self.bwd.step(xs.row(t), &h, &c);
            out.row_mut(t)[hs..].copy_from_slice(&h2);
            bwd[t] = Some(cache);
            h = h2;
            c = c2;
        }
        let bwd = bwd.into_iter().map(|c| c.expect("every step visited")).collect();
        (out, BiLstmCache { fwd, bwd })
    }

    /// Backpropagates `dout` (same shape as the forward output). Returns the
    /// input gradient when `need_dx` is set.
    pub fn backward(&mut self, cache: &BiLstmCache, dout: &Mat, need_dx: bool) -> Option<Mat> {
        let n = dout.rows;
        let hs = self.fwd.hidden_size();
        let input = self.fwd.input_size();
        let mut dx = need_dx.then(|| Mat::zeros(n, input));

        let mut dh_next = vec![0.0; hs];
        let mut dc_next = vec![0.0; hs];
        for t in (0..n).rev() {
            let mut dh = dout.row(t)[..hs].to_vec();
            dh.iter_mut().zip(&dh_next).for_each(|(a, b)| *a += b);
            let (dxh, dc_prev) = self.fwd.step_backward(&cache.fwd[t], &dh, &dc_next);
            if let Some(dx) = dx.as_mut() {
                dx.row_mut(t)
                    .iter_mut()
                    .zip(&dxh[..input])
                    .for_each(|(a, b)| *a += b);
            }
            dh_next.copy_from_slice(&dxh[input..]);
            dc_next = dc_prev;
        }

        let mut dh_next = vec![0.0; hs];
        let mut dc_next = vec![0.0; hs];
        for t in 0..n {
            let mut dh = dout.row(t)[hs..].to_vec();
            dh.iter_mut().zip(&dh_next).for_each(|(a, b)| *a += b);
            let (dxh, dc_prev) = self.bwd.step_backward(&cache.bwd[t], &dh, &dc_next);
            if let Some(dx) = dx.as_mut() {
                dx.row_mut(t)
                    .iter_mut()
                    .zip(&dxh[..input])
                    .for_each(|(a, b)| *a += b);
            }
            dh_next.copy_from_slice(&dxh[input..]);
            dc_next = dc_prev;
        }
        dx
    }
}

impl Parameterized for BiLstm {
    fn visit(&self, f: &mut dyn FnMut(&Param)) {
        self.fwd.visit(f);
        self.bwd.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.fwd.visit_mut(f);
        self.bwd.visit_mut(f);
    }
}
