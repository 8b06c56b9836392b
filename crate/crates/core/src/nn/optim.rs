use super::param::Parameterized;

/// Update rule with per-parameter state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rule {
    /// AdaDelta; the learning rate scales the unit-corrected step.
    AdaDelta { rho: f64, eps: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Rule {
    pub fn adadelta() -> Self {
        Rule::AdaDelta { rho: 0.95, eps: 1e-6 }
    }

    pub fn adam() -> Self {
        Rule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Optimizer {
    rule: Rule,
    clip_norm: Option<f64>,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(rule: Rule, clip_norm: Option<f64>) -> Self {
        Self {
            rule,
            clip_norm,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update from the gradients currently stored in `model`.
    pub fn step<M: Parameterized + ?Sized>(&mut self, model: &mut M, lr: f64) {
        if self.first.is_empty() {
            model.visit(&mut |p| {
                self.first.push(vec![0.0; p.len()]);
                self.second.push(vec![0.0; p.len()]);
            });
        }
        let scale = match self.clip_norm {
            Some(max) => {
                let mut sq = 0.0;
                model.visit(&mut |p| sq += p.grad.iter().map(|g| g * g).sum::<f64>());
                let norm = sq.sqrt();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.steps += 1;
        let t = self.steps as f64;
        let rule = self.rule;
        let mut idx = 0;
        let (first, second) = (&mut self.first, &mut self.second);
        model.visit_mut(&mut |p| {
            let m = &mut first[idx];
            let v = &mut second[idx];
            idx += 1;
            match rule {
                Rule::AdaDelta { rho, eps } => {
                    // first: running E[g²]; second: running E[Δx²]
                    for k in 0..p.value.len() {
                        let g = p.grad[k] * scale;
                        m[k] = rho * m[k] + (1.0 - rho) * g * g;
                        let delta = ((v[k] + eps).sqrt() / (m[k] + eps).sqrt()) * g;
                        v[k] = rho * v[k] + (1.0 - rho) * delta * delta;
                        p.value[k] -= lr * delta;
                    }
                }
                Rule::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powf(t);
                    let c2 = 1.0 - beta2.powf(t);
                    for k in 0..p.value.len() {
                        let g = p.grad[k] * scale;
                        m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                        v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                        let mh = m[k] / c1;
                        let vh = v[k] / c2;
                        p.value[k] -= lr * mh / (vh.sqrt() + eps);
                    }
                }
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::param::{Param, Parameterized};

    struct Quad(Param);

    impl Parameterized for Quad {
        fn visit(&self, f: &mut dyn FnMut(&Param)) {
            f(&self.0)
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
            f(&mut self.0)
        }
    }

    fn minimize(rule: Rule, lr: f64, iters: usize) -> f64 {
        let mut q = Quad(Param::zeros("x", 1, 2));
        q.0.value = vec![3.0, -2.0];
        let mut opt = Optimizer::new(rule, None);
        for _ in 0..iters {
            q.0.grad = q.0.value.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut q, lr);
        }
        q.0.value.iter().map(|x| x * x).sum()
    }

    #[test]
    fn adam_descends_a_quadratic() {
        assert!(minimize(Rule::adam(), 0.05, 2000) < 1e-4);
    }

    #[test]
    fn adadelta_descends_a_quadratic() {
        assert!(minimize(Rule::adadelta(), 1.0, 5000) < 1.0);
    }

    #[test]
    fn clipping_bounds_the_first_adam_move() {
        let mut q = Quad(Param::zeros("x", 1, 1));
        q.0.grad = vec![1e6];
        let mut opt = Optimizer::new(Rule::adam(), Some(1.0));
        opt.step(&mut q, 0.1);
        assert!((q.0.value[0] + 0.1).abs() < 1e-6);
    }
}
