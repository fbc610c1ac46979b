//! Concatenation critic: the non-attention baseline. Each agent's Q
//! network sees every observation and every other agent's action glued
//! into one flat vector, so its input width grows linearly with the
//! number of agents. An own-observation mode drops the central view
//! entirely for the fully decentralized baseline.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{
    affine_backward, affine_forward, leaky_relu_backward, leaky_relu_forward, DenseMatrix,
    ParamTensor, LEAKY_SLOPE,
};

use super::attention::one_hot_rows;

#[derive(Clone, Debug)]
struct ThreeLayer {
    w1: ParamTensor,
    b1: ParamTensor,
    w2: ParamTensor,
    b2: ParamTensor,
    w3: ParamTensor,
    b3: ParamTensor,
}

impl ThreeLayer {
    fn new(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        ThreeLayer {
            w1: ParamTensor::uniform_init(in_dim, hidden, rng),
            b1: ParamTensor::zeros(1, hidden),
            w2: ParamTensor::uniform_init(hidden, hidden, rng),
            b2: ParamTensor::zeros(1, hidden),
            w3: ParamTensor::uniform_init(hidden, out_dim, rng),
            b3: ParamTensor::zeros(1, out_dim),
        }
    }
}

struct NetCache {
    input: DenseMatrix,
    h1_pre: DenseMatrix,
    h1: DenseMatrix,
    h2_pre: DenseMatrix,
    h2: DenseMatrix,
}

pub struct ConcatCache {
    nets: Vec<NetCache>,
}

/// Per-agent feedforward critics over concatenated inputs, with one
/// output per own action like the attention critic.
#[derive(Clone, Debug)]
pub struct ConcatCritic {
    nets: Vec<ThreeLayer>,
    obs_dims: Vec<usize>,
    action_dims: Vec<usize>,
    own_obs_only: bool,
}

impl ConcatCritic {
    pub fn new(
        obs_dims: &[usize],
        action_dims: &[usize],
        hidden: usize,
        own_obs_only: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if obs_dims.is_empty() || obs_dims.len() != action_dims.len() {
            return Err(Error::Config(format!(
                "need matching non-empty dimension lists, got {} obs and {} action entries",
                obs_dims.len(),
                action_dims.len()
            )));
        }
        if hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        let n = obs_dims.len();
        let nets = (0..n)
            .map(|i| {
                let in_dim = if own_obs_only {
                    obs_dims[i]
                } else {
                    let all_obs: usize = obs_dims.iter().sum();
                    let other_actions: usize = action_dims
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, &k)| k)
                        .sum();
                    all_obs + other_actions
                };
                ThreeLayer::new(in_dim, hidden, action_dims[i], rng)
            })
            .collect();
        Ok(ConcatCritic {
            nets,
            obs_dims: obs_dims.to_vec(),
            action_dims: action_dims.to_vec(),
            own_obs_only,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.obs_dims.len()
    }

    pub fn is_own_obs_only(&self) -> bool {
        self.own_obs_only
    }

    pub fn action_dims(&self) -> &[usize] {
        &self.action_dims
    }

    /// Input width of agent i's network.
    pub fn input_dim(&self, agent: usize) -> usize {
        self.nets[agent].w1.shape().0
    }

    fn check_inputs(&self, obs: &[DenseMatrix], actions: &[Vec<usize>]) -> Result<usize> {
        let n = self.num_agents();
        if obs.len() != n || actions.len() != n {
            return Err(Error::Dimension(format!(
                "critic built for {n} agents, got {} observation and {} action sets",
                obs.len(),
                actions.len()
            )));
        }
        let batch = obs[0].rows();
        for (i, o) in obs.iter().enumerate() {
            if o.rows() != batch || o.cols() != self.obs_dims[i] {
                return Err(Error::Dimension(format!(
                    "agent {i}: observation block is {}x{}, expected {batch}x{}",
                    o.rows(),
                    o.cols(),
                    self.obs_dims[i]
                )));
            }
            if actions[i].len() != batch {
                return Err(Error::Dimension(format!(
                    "agent {i}: {} actions for a batch of {batch}",
                    actions[i].len()
                )));
            }
            for &a in &actions[i] {
                if a >= self.action_dims[i] {
                    return Err(Error::Action { agent: i, action: a, limit: self.action_dims[i] });
                }
            }
        }
        Ok(batch)
    }

    fn build_input(
        &self,
        agent: usize,
        obs: &[DenseMatrix],
        actions: &[Vec<usize>],
    ) -> Result<DenseMatrix> {
        if self.own_obs_only {
            return Ok(obs[agent].clone());
        }
        let mut blocks: Vec<DenseMatrix> = obs.to_vec();
        for (j, acts) in actions.iter().enumerate() {
            if j != agent {
                blocks.push(one_hot_rows(acts, self.action_dims[j]));
            }
        }
        let refs: Vec<&DenseMatrix> = blocks.iter().collect();
        DenseMatrix::hconcat(&refs)
    }

    /// Per-agent batch x |A_i| value tables, mirroring the attention
    /// critic's interface.
    pub fn forward(
        &self,
        obs: &[DenseMatrix],
        actions: &[Vec<usize>],
    ) -> Result<(Vec<DenseMatrix>, ConcatCache)> {
        self.check_inputs(obs, actions)?;
        let n = self.num_agents();
        let mut qvals = Vec::with_capacity(n);
        let mut caches = Vec::with_capacity(n);
        for i in 0..n {
            let input = self.build_input(i, obs, actions)?;
            let net = &self.nets[i];
            let h1_pre = affine_forward(&input, &net.w1, Some(&net.b1))?;
            let h1 = leaky_relu_forward(&h1_pre, LEAKY_SLOPE);
            let h2_pre = affine_forward(&h1, &net.w2, Some(&net.b2))?;
            let h2 = leaky_relu_forward(&h2_pre, LEAKY_SLOPE);
            let q = affine_forward(&h2, &net.w3, Some(&net.b3))?;
            qvals.push(q);
            caches.push(NetCache { input, h1_pre, h1, h2_pre, h2 });
        }
        Ok((qvals, ConcatCache { nets: caches }))
    }

    pub fn backward(&mut self, cache: &ConcatCache, dq: &[DenseMatrix]) -> Result<()> {
        let n = self.num_agents();
        if dq.len() != n {
            return Err(Error::Dimension(format!(
                "{} upstream gradients for {n} agents",
                dq.len()
            )));
        }
        for i in 0..n {
            let net = &mut self.nets[i];
            let c = &cache.nets[i];
            let dh2 = affine_backward(&c.h2, &mut net.w3, Some(&mut net.b3), &dq[i])?;
            let dh2_pre = leaky_relu_backward(&c.h2_pre, &dh2, LEAKY_SLOPE);
            let dh1 = affine_backward(&c.h1, &mut net.w2, Some(&mut net.b2), &dh2_pre)?;
            let dh1_pre = leaky_relu_backward(&c.h1_pre, &dh1, LEAKY_SLOPE);
            affine_backward(&c.input, &mut net.w1, Some(&mut net.b1), &dh1_pre)?;
        }
        Ok(())
    }

    /// Per-action values for one agent at a single joint observation,
    /// same contract as the attention critic.
    pub fn q_values(&self, agent: usize, obs: &[Vec<f64>], actions: &[Option<usize>]) -> Result<Vec<f64>> {
        let n = self.num_agents();
        if agent >= n {
            return Err(Error::Dimension(format!("agent {agent} out of range for {n}")));
        }
        if obs.len() != n || actions.len() != n {
            return Err(Error::Dimension(format!(
                "expected {n} observations and actions, got {} and {}",
                obs.len(),
                actions.len()
            )));
        }
        for (j, a) in actions.iter().enumerate() {
            if j != agent && a.is_none() && !self.own_obs_only {
                return Err(Error::Contract(format!(
                    "per-action values for agent {agent} need every other agent's action; \
                     agent {j} has none"
                )));
            }
        }
        let obs_mats: Vec<DenseMatrix> = obs.iter().map(|o| DenseMatrix::from_row(o)).collect();
        let acts: Vec<Vec<usize>> = actions.iter().map(|a| vec![a.unwrap_or(0)]).collect();
        let (qvals, _) = self.forward(&obs_mats, &acts)?;
        Ok(qvals[agent].row(0).to_vec())
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        for net in &mut self.nets {
            out.push(&mut net.w1);
            out.push(&mut net.b1);
            out.push(&mut net.w2);
            out.push(&mut net.b2);
            out.push(&mut net.w3);
            out.push(&mut net.b3);
        }
        out
    }

    pub fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        let mut out = Vec::new();
        for (i, net) in self.nets.iter().enumerate() {
            out.push((format!("net.{i}.w1"), &net.w1));
            out.push((format!("net.{i}.b1"), &net.b1));
            out.push((format!("net.{i}.w2"), &net.w2));
            out.push((format!("net.{i}.b2"), &net.b2));
            out.push((format!("net.{i}.w3"), &net.w3));
            out.push((format!("net.{i}.b3"), &net.b3));
        }
        out
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

    pub fn soft_update_from(&mut self, live: &ConcatCritic, tau: f64) {
        let live_params: Vec<&ParamTensor> = live.named_params().into_iter().map(|(_, p)| p).collect();
        for (target, source) in self.params_mut().into_iter().zip(live_params) {
            target.soft_update_from(source, tau);
        }
    }
}
