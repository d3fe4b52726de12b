use ndarray::{Array1, Array2, ArrayView1};
use rand_distr::{Distribution, Normal};

use crate::rng::{self, Stream};

/// One-hidden-layer feature extractor `W2 tanh(W1 x + b1) + b2`, standing in
/// for a convolutional backbone on synthetic inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyBackbone {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl TinyBackbone {
    pub fn new(input: usize, hidden: usize, output: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Stream::Backbone);
        let n1 = Normal::new(0.0, (1.0 / input as f64).sqrt()).expect("valid sigma");
        let n2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).expect("valid sigma");
        Self {
            w1: Array2::from_shape_simple_fn((hidden, input), || n1.sample(&mut rng)),
            b1: Array1::zeros(hidden),
            w2: Array2::from_shape_simple_fn((output, hidden), || n2.sample(&mut rng)),
            b2: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.nrows()
    }

    /// Returns `(features, hidden activations)`.
    pub fn forward(&self, x: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
        let h = (self.w1.dot(&x) + &self.b1).mapv(f64::tanh);
        let f = self.w2.dot(&h) + &self.b2;
        (f, h)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
        }
    }

    /// Accumulates parameter gradients into `grad` given `∂L/∂features`.
    pub fn backward(&self, x: ArrayView1<f64>, h: &Array1<f64>, gf: ArrayView1<f64>, grad: &mut TinyBackbone) {
        let hidden = h.len();
        let input = x.len();
        let mut gh = self.w2.t().dot(&gf);
        for r in 0..gf.len() {
            grad.b2[r] += gf[r];
            for j in 0..hidden {
                grad.w2[[r, j]] += gf[r] * h[j];
            }
        }
        for j in 0..hidden {
            gh[j] *= 1.0 - h[j] * h[j];
            grad.b1[j] += gh[j];
            for i in 0..input {
                grad.w1[[j, i]] += gh[j] * x[i];
            }
        }
    }

    /// `self -= lr * grad`.
    pub fn descend(&mut self, grad: &TinyBackbone, lr: f64) {
        self.w1.scaled_add(-lr, &grad.w1);
        self.b1.scaled_add(-lr, &grad.b1);
        self.w2.scaled_add(-lr, &grad.w2);
        self.b2.scaled_add(-lr, &grad.b2);
    }

    pub fn scale(&mut self, k: f64) {
        self.w1 *= k;
        self.b1 *= k;
        self.w2 *= k;
        self.b2 *= k;
    }
}
