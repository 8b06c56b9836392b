use rand::Rng;

/// A named, row-major parameter tensor with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            value: vec![0.0; rows * cols],
            grad: vec![0.0; rows * cols],
        }
    }

    /// Uniform initialization in `[-range, range]`.
    pub fn uniform<R: Rng>(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        range: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(name, rows, cols);
        for v in &mut p.value {
            *v = rng.gen_range(-range..=range);
        }
        p
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.value.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.value[r * self.cols..(r + 1) * self.cols]
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Anything that owns parameters in a fixed declaration order.
///
/// The visiting order is the checkpoint order and the optimizer-state order,
/// so implementations must never reorder their fields.
pub trait Parameterized {
    fn visit(&self, f: &mut dyn FnMut(&Param));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |p| n += p.len());
        n
    }

    fn zero_grad(&mut self) {
        self.visit_mut(&mut |p| p.zero_grad());
    }

    fn scale_grad(&mut self, s: f64) {
        self.visit_mut(&mut |p| p.grad.iter_mut().for_each(|g| *g *= s));
    }

    /// Flattened copy of every gradient, in declaration order.
    fn flat_grad(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |p| out.extend_from_slice(&p.grad));
        out
    }

    fn flat_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |p| out.extend_from_slice(&p.value));
        out
    }

    /// Reads or writes one scalar by its flat index.
    fn get_flat(&self, index: usize) -> f64 {
        let mut offset = 0;
        let mut found = None;
        self.visit(&mut |p| {
            if found.is_none() && index < offset + p.len() {
                found = Some(p.value[index - offset]);
            }
            offset += p.len();
        });
        found.expect("flat parameter index out of range")
    }

    fn set_flat(&mut self, index: usize, value: f64) {
        let mut offset = 0;
        let mut done = false;
        self.visit_mut(&mut |p| {
            if !done && index < offset + p.len() {
                p.value[index - offset] = value;
                done = true;
            }
            offset += p.len();
        });
        assert!(done, "flat parameter index out of range");
    }

    /// Names and element ranges of each parameter group in the flat layout.
    fn param_groups(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        let mut offset = 0;
        self.visit(&mut |p| {
            out.push((p.name.clone(), offset..offset + p.len()));
            offset += p.len();
        });
        out
    }
}
