//! Decentralized discrete policies: a two-layer network per agent mapping
//! an observation to action probabilities.

use rand::Rng;

use crate::error::Result;
use crate::numcore::{
    affine_backward, affine_forward, entropy, leaky_relu_backward, leaky_relu_forward,
    softmax, DenseMatrix, ParamTensor, LEAKY_SLOPE,
};

/// One draw from a policy.
#[derive(Clone, Debug)]
pub struct ActionSample {
    pub action: usize,
    pub log_prob: f64,
    pub probs: Vec<f64>,
}

impl ActionSample {
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }
}

/// obs -> hidden (leaky ReLU) -> logits.
#[derive(Clone, Debug)]
pub struct PolicyNet {
    pub w1: ParamTensor,
    pub b1: ParamTensor,
    pub w2: ParamTensor,
    pub b2: ParamTensor,
}

/// Intermediate activations needed by `backward_logits`.
pub struct PolicyCache {
    x: DenseMatrix,
    h_pre: DenseMatrix,
    h: DenseMatrix,
}

impl PolicyNet {
    pub fn new(obs_dim: usize, hidden: usize, n_actions: usize, rng: &mut impl Rng) -> Self {
        PolicyNet {
            w1: ParamTensor::uniform_init(obs_dim, hidden, rng),
            b1: ParamTensor::zeros(1, hidden),
            w2: ParamTensor::uniform_init(hidden, n_actions, rng),
            b2: ParamTensor::zeros(1, n_actions),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.w1.value.rows()
    }

    pub fn num_actions(&self) -> usize {
        self.w2.value.cols()
    }

    /// Batched forward pass to logits; one observation per row.
    pub fn logits(&self, x: &DenseMatrix) -> Result<(DenseMatrix, PolicyCache)> {
        let h_pre = affine_forward(x, &self.w1, Some(&self.b1))?;
        let h = leaky_relu_forward(&h_pre, LEAKY_SLOPE);
        let out = affine_forward(&h, &self.w2, Some(&self.b2))?;
        Ok((out, PolicyCache { x: x.clone(), h_pre, h }))
    }

    /// Accumulates parameter gradients given dL/dlogits; returns dL/dx.
    pub fn backward_logits(
        &mut self,
        cache: &PolicyCache,
        dlogits: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        let dh = affine_backward(&cache.h, &mut self.w2, Some(&mut self.b2), dlogits)?;
        let dh_pre = leaky_relu_backward(&cache.h_pre, &dh, LEAKY_SLOPE);
        affine_backward(&cache.x, &mut self.w1, Some(&mut self.b1), &dh_pre)
    }

    /// Softmax over the logits for one observation.
    pub fn action_distribution(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let (logits, _) = self.logits(&DenseMatrix::from_row(obs))?;
        softmax(logits.row(0))
    }

    /// Draws an action by inverse-CDF sampling on the softmax probabilities.
    pub fn sample(&self, obs: &[f64], rng: &mut impl Rng) -> Result<ActionSample> {
        let probs = self.action_distribution(obs)?;
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut action = probs.len() - 1;
        for (k, &p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                action = k;
                break;
            }
        }
        let log_prob = probs[action].ln();
        Ok(ActionSample { action, log_prob, probs })
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn adam_step(&mut self, lr: f64) {
        for p in self.params_mut() {
            p.adam_step_default(lr);
        }
    }

    pub fn soft_update_from(&mut self, live: &PolicyNet, tau: f64) {
        self.w1.soft_update_from(&live.w1, tau);
        self.b1.soft_update_from(&live.b1, tau);
        self.w2.soft_update_from(&live.w2, tau);
        self.b2.soft_update_from(&live.b2, tau);
    }
}
