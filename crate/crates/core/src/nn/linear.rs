use rand::Rng;

use super::ops::{axpy, dot};
use super::param::{Param, Parameterized};

/// Affine map `y = W x + b` with `W` stored as `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    pub fn new<R: Rng>(name: &str, in_dim: usize, out_dim: usize, init: f64, rng: &mut R) -> Self {
        Self {
            weight: Param::uniform(format!("{name}.weight"), out_dim, in_dim, init, rng),
            bias: Param::uniform(format!("{name}.bias"), out_dim, 1, init, rng),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows
    }

    pub fn forward_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim());
        for (o, yo) in y.iter_mut().enumerate() {
            *yo = self.bias.value[o] + dot(self.weight.row(o), x);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.out_dim()];
        self.forward_into(x, &mut y);
        y
    }

    /// Accumulates parameter gradients and, when requested, adds `Wᵀ dy` into `dx`.
    pub fn backward(&mut self, x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
        let cols = self.in_dim();
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.bias.grad[o] += g;
            axpy(g, x, &mut self.weight.grad[o * cols..(o + 1) * cols]);
        }
        if let Some(dx) = dx {
            for (o, &g) in dy.iter().enumerate() {
                if g != 0.0 {
                    axpy(g, self.weight.row(o), dx);
                }
            }
        }
    }
}

impl Parameterized for Linear {
    fn visit(&self, f: &mut dyn FnMut(&Param)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}
