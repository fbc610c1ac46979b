//! Learnable parameter tensors with gradient and Adam moment storage.

use rand::Rng;

use super::matrix::DenseMatrix;

/// A learnable matrix bundled with its gradient accumulator and Adam state.
///
/// `grad`, `adam_m` and `adam_v` always share the value's shape. The moments
/// start at zero and `step_count` only ever increases.
#[derive(Debug, Clone)]
pub struct ParamTensor {
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
    pub adam_m: DenseMatrix,
    pub adam_v: DenseMatrix,
    pub step_count: u64,
}

impl ParamTensor {
    /// Zero-valued parameter (used for biases).
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            value: DenseMatrix::zeros(rows, cols),
            grad: DenseMatrix::zeros(rows, cols),
            adam_m: DenseMatrix::zeros(rows, cols),
            adam_v: DenseMatrix::zeros(rows, cols),
            step_count: 0,
        }
    }

    /// Weight initialization: uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]
    /// where fan_in is the row count (input dimension of x W).
    pub fn uniform_init<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (rows as f64).sqrt();
        let mut p = Self::zeros(rows, cols);
        for v in p.value.data_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        p
    }

    pub fn from_matrix(value: DenseMatrix) -> Self {
        let (rows, cols) = value.shape();
        Self {
            value,
            grad: DenseMatrix::zeros(rows, cols),
            adam_m: DenseMatrix::zeros(rows, cols),
            adam_v: DenseMatrix::zeros(rows, cols),
            step_count: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// One Adam update with bias correction; clears the gradient afterwards.
    pub fn adam_step(&mut self, lr: f64, beta1: f64, beta2: f64, eps: f64) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let n = self.value.data().len();
        for i in 0..n {
            let g = self.grad.data()[i];
            let m = beta1 * self.adam_m.data()[i] + (1.0 - beta1) * g;
            let v = beta2 * self.adam_v.data()[i] + (1.0 - beta2) * g * g;
            self.adam_m.data_mut()[i] = m;
            self.adam_v.data_mut()[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            self.value.data_mut()[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        self.zero_grad();
    }

    /// `adam_step` with the stock beta/epsilon constants below.
    pub fn adam_step_default(&mut self, lr: f64) {
        self.adam_step(lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
    }

    /// Move this tensor's value toward `live` by fraction `tau`:
    /// value = (1 - tau) * value + tau * live.
    pub fn soft_update_from(&mut self, live: &ParamTensor, tau: f64) {
        debug_assert_eq!(self.shape(), live.shape());
        for (t, &l) in self
            .value
            .data_mut()
            .iter_mut()
            .zip(live.value.data().iter())
        {
            *t = (1.0 - tau) * *t + tau * l;
        }
    }
}

/// Adam hyperparameters. The learning rate comes from the train config;
/// the betas and epsilon are the usual defaults.
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
