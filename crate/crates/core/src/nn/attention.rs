//! Additive (Bahdanau) attention:
//! `e_j = vᵀ tanh(W_k k_j + W_q q + b)`, `a = softmax(e)`, `ctx = Σ_j a_j k_j`.

use rand::Rng;

use super::linear::Linear;
use super::ops::{axpy, dot, softmax, Mat};
use super::param::{Param, Parameterized};

#[derive(Clone, Debug, PartialEq)]
pub struct AdditiveAttention {
    pub key_proj: Linear,
    pub query_proj: Param,
    pub score: Param,
}

/// Keys plus their projection, computed once per sequence.
#[derive(Clone, Debug)]
pub struct AttentionMemory {
    pub keys: Mat,
    proj: Mat,
}

impl AttentionMemory {
    pub fn len(&self) -> usize {
        self.keys.rows
    }

    pub fn is_empty(&self) -> bool {
        self.keys.rows == 0
    }
}

/// Gradient buffers matching an [`AttentionMemory`].
#[derive(Clone, Debug)]
pub struct MemoryGrad {
    pub keys: Mat,
    proj: Mat,
}

#[derive(Clone, Debug)]
pub struct AttendCache {
    query: Vec<f64>,
    hidden: Mat,
    pub weights: Vec<f64>,
}

impl AdditiveAttention {
    pub fn new<R: Rng>(name: &str, key_dim: usize, query_dim: usize, att_dim: usize, init: f64, rng: &mut R) -> Self {
        Self {
            key_proj: Linear::new(&format!("{name}.key"), key_dim, att_dim, init, rng),
            query_proj: Param::uniform(format!("{name}.query"), att_dim, query_dim, init, rng),
            score: Param::uniform(format!("{name}.score"), att_dim, 1, init, rng),
        }
    }

    fn att_dim(&self) -> usize {
        self.score.rows
    }

    pub fn prepare(&self, keys: Mat) -> AttentionMemory {
        let mut proj = Mat::zeros(keys.rows, self.att_dim());
        for j in 0..keys.rows {
            self.key_proj.forward_into(keys.row(j), proj.row_mut(j));
        }
        AttentionMemory { keys, proj }
    }

    pub fn zero_memory_grad(&self, mem: &AttentionMemory) -> MemoryGrad {
        MemoryGrad {
            keys: Mat::zeros(mem.keys.rows, mem.keys.cols),
            proj: Mat::zeros(mem.proj.rows, mem.proj.cols),
        }
    }

    /// Returns the context vector and the cache (which holds the weights).
    pub fn attend(&self, mem: &AttentionMemory, query: &[f64]) -> (Vec<f64>, AttendCache) {
        let a_dim = self.att_dim();
        let qp: Vec<f64> = (0..a_dim).map(|r| dot(self.query_proj.row(r), query)).collect();
        let n = mem.len();
        let mut hidden = Mat::zeros(n, a_dim);
        let mut energies = vec![0.0; n];
        for j in 0..n {
            let row = hidden.row_mut(j);
            for (k, u) in row.iter_mut().enumerate() {
                *u = (mem.proj.row(j)[k] + qp[k]).tanh();
            }
            energies[j] = dot(row, &self.score.value);
        }
        let weights = softmax(&energies);
        let mut ctx = vec![0.0; mem.keys.cols];
        for (j, &w) in weights.iter().enumerate() {
            axpy(w, mem.keys.row(j), &mut ctx);
        }
        (
            ctx,
            AttendCache {
                query: query.to_vec(),
                hidden,
                weights,
            },
        )
    }

    /// Accumulates into parameter grads, `dquery`, and the memory gradient.
    pub fn attend_backward(
        &mut self,
        mem: &AttentionMemory,
        cache: &AttendCache,
        dctx: &[f64],
        dquery: &mut [f64],
        dmem: &mut MemoryGrad,
    ) {
        let n = mem.len();
        let a_dim = self.att_dim();
        let w = &cache.weights;
        let dw: Vec<f64> = (0..n).map(|j| dot(dctx, mem.keys.row(j))).collect();
        for (j, &wj) in w.iter().enumerate() {
            axpy(wj, dctx, dmem.keys.row_mut(j));
        }
        let mean: f64 = w.iter().zip(&dw).map(|(a, b)| a * b).sum();
        let mut dqp = vec![0.0; a_dim];
        for j in 0..n {
            let de = w[j] * (dw[j] - mean);
            if de == 0.0 {
                continue;
            }
            let u = cache.hidden.row(j);
            axpy(de, u, &mut self.score.grad);
            let dproj = dmem.proj.row_mut(j);
            for k in 0..a_dim {
                let dpre = de * self.score.value[k] * (1.0 - u[k] * u[k]);
                dproj[k] += dpre;
                dqp[k] += dpre;
            }
        }
        let qcols = self.query_proj.cols;
        for (r, &g) in dqp.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            axpy(g, &cache.query, &mut self.query_proj.grad[r * qcols..(r + 1) * qcols]);
            axpy(g, self.query_proj.row(r), dquery);
        }
    }

    /// Pushes the accumulated projection gradient through the key projection,
    /// adding to `dmem.keys`. Call once after all steps are back-propagated.
    pub fn memory_backward(&mut self, mem: &AttentionMemory, dmem: &mut MemoryGrad) {
        for j in 0..mem.len() {
            let (keys, proj) = (&mut dmem.keys, &dmem.proj);
            self.key_proj.backward(mem.keys.row(j), proj.row(j), Some(keys.row_mut(j)));
        }
    }
}

impl Parameterized for AdditiveAttention {
    fn visit(&self, f: &mut dyn FnMut(&Param)) {
        self.key_proj.visit(f);
        f(&self.query_proj);
        f(&self.score);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.key_proj.visit_mut(f);
        f(&mut self.query_proj);
        f(&mut self.score);
    }
}
