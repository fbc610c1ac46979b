//! Soft actor-critic updates for a team of discrete-action agents: joint
//! critic regression against entropy-regularized bootstrap targets, policy
//! gradients with the exact counterfactual baseline, and soft target
//! tracking.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{gumbel_softmax, gumbel_softmax_backward, PolicyNet};
use crate::critics::{Critic, CriticArch};
use crate::error::{Error, Result};
use crate::numcore::{log_softmax, softmax, DenseMatrix};

use super::buffer::Transition;
use super::{Algorithm, TrainConfig};

/// Relaxation temperature for the straight-through policy updates of the
/// decentralized variant.
const GUMBEL_TEMPERATURE: f64 = 1.0;

impl Algorithm {
    pub fn critic_arch(self, heads: usize) -> CriticArch {
        match self {
            Algorithm::Maac => CriticArch::Attention { heads, uniform: false },
            Algorithm::MaacUniform => CriticArch::Attention { heads, uniform: true },
            Algorithm::MaddpgSac => CriticArch::Central,
            Algorithm::Ddpg => CriticArch::Decentralized,
        }
    }

    /// Whether policies are updated with the score-function gradient and
    /// counterfactual baseline (as opposed to the straight-through path).
    pub fn uses_soft_policy_update(self) -> bool {
        !matches!(self, Algorithm::Ddpg)
    }
}

pub struct Learner {
    policies: Vec<PolicyNet>,
    target_policies: Vec<PolicyNet>,
    critic: Critic,
    target_critic: Critic,
    cfg: TrainConfig,
    last_attention_entropy: Vec<Vec<f64>>,
}

impl Learner {
    pub fn new(
        obs_dims: &[usize],
        action_dims: &[usize],
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        if obs_dims.is_empty() || obs_dims.len() != action_dims.len() {
            return Err(Error::Config(format!(
                "need matching non-empty dimension lists, got {} obs and {} action entries",
                obs_dims.len(),
                action_dims.len()
            )));
        }
        let policies: Vec<PolicyNet> = obs_dims
            .iter()
            .zip(action_dims)
            .map(|(&o, &a)| PolicyNet::new(o, cfg.hidden, a, rng))
            .collect();
        let critic = Critic::new(
            cfg.algorithm.critic_arch(cfg.heads),
            obs_dims,
            action_dims,
            cfg.hidden,
            rng,
        )?;
        let target_policies = policies.clone();
        let target_critic = critic.clone();
        Ok(Learner {
            policies,
            target_policies,
            critic,
            target_critic,
            cfg: cfg.clone(),
            last_attention_entropy: Vec::new(),
        })
    }

    pub fn num_agents(&self) -> usize {
        self.policies.len()
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn policies(&self) -> &[PolicyNet] {
        &self.policies
    }

    pub fn policies_mut(&mut self) -> &mut [PolicyNet] {
        &mut self.policies
    }

    pub fn target_policies(&self) -> &[PolicyNet] {
        &self.target_policies
    }

    pub fn target_policies_mut(&mut self) -> &mut [PolicyNet] {
        &mut self.target_policies
    }

    pub fn critic(&self) -> &Critic {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut Critic {
        &mut self.critic
    }

    pub fn target_critic(&self) -> &Critic {
        &self.target_critic
    }

    pub fn target_critic_mut(&mut self) -> &mut Critic {
        &mut self.target_critic
    }

    /// Mean attention entropy per agent and head from the most recent
    /// critic update; empty for critics without attention.
    pub fn last_attention_entropy(&self) -> &[Vec<f64>] {
        &self.last_attention_entropy
    }

    fn stack_obs<'a, F>(&self, batch: &[&'a Transition], pick: F) -> Result<Vec<DenseMatrix>>
    where
        F: Fn(&'a Transition, usize) -> &'a [f64],
    {
        let n = self.num_agents();
        let b = batch.len();
        (0..n)
            .map(|i| {
                let width = self.policies[i].obs_dim();
                let mut data = Vec::with_capacity(b * width);
                for t in batch {
                    let row = pick(t, i);
                    if row.len() != width {
                        return Err(Error::Dimension(format!(
                            "agent {i}: stored observation has {} entries, expected {width}",
                            row.len()
                        )));
                    }
                    data.extend_from_slice(row);
                }
                DenseMatrix::from_vec(b, width, data)
            })
            .collect()
    }

    /// One regression step of every critic toward the entropy-regularized
    /// bootstrap target; returns the summed mean squared error.
    pub fn critic_update(&mut self, batch: &[&Transition], rng: &mut ChaCha8Rng) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Contract("critic update needs a non-empty minibatch".into()));
        }
        let n = self.num_agents();
        for t in batch {
            if t.num_agents() != n {
                return Err(Error::Dimension(format!(
                    "transition has {} agents, learner has {n}",
                    t.num_agents()
                )));
            }
        }
        let b = batch.len();
        let obs = self.stack_obs(batch, |t, i| &t.observations[i])?;
        let next_obs = self.stack_obs(batch, |t, i| &t.next_observations[i])?;
        let actions: Vec<Vec<usize>> =
            (0..n).map(|i| batch.iter().map(|t| t.actions[i]).collect()).collect();

        // Next actions and their log probabilities come from the target
        // policies; the whole target is a constant for the regression.
        let mut next_actions: Vec<Vec<usize>> = vec![Vec::with_capacity(b); n];
        let mut next_logp = vec![vec![0.0; b]; n];
        for i in 0..n {
            for (r, t) in batch.iter().enumerate() {
                let s = self.target_policies[i].sample(&t.next_observations[i], rng)?;
                next_actions[i].push(s.action);
                next_logp[i][r] = s.log_prob;
            }
        }
        let (target_q, _) = self.target_critic.forward(&next_obs, &next_actions)?;

        let (q, cache) = self.critic.forward(&obs, &actions)?;
        let mut loss = 0.0;
        let mut dq = Vec::with_capacity(n);
        let inv_b = 1.0 / b as f64;
        for i in 0..n {
            let mut d = DenseMatrix::zeros(b, q[i].cols());
            for r in 0..b {
                let bootstrap = target_q[i].at(r, next_actions[i][r])
                    - self.cfg.temperature * next_logp[i][r];
                let y = batch[r].rewards[i] + self.cfg.gamma * bootstrap;
                let diff = q[i].at(r, actions[i][r]) - y;
                loss += diff * diff * inv_b;
                *d.at_mut(r, actions[i][r]) = 2.0 * diff * inv_b;
            }
            dq.push(d);
        }
        if let Some(trace) = self.critic.trace(&cache) {
            self.last_attention_entropy = (0..trace.num_agents())
                .map(|i| (0..trace.num_heads()).map(|h| trace.mean_entropy(i, h)).collect())
                .collect();
        }
        self.critic.zero_grad();
        self.critic.backward(&cache, &dq)?;
        self.critic.adam_step(self.cfg.lr);
        Ok(loss)
    }

    /// Expected own-action value under the current policy with the other
    /// agents' actions held fixed: one critic pass plus a dot product.
    pub fn baseline(
        &self,
        agent: usize,
        obs: &[Vec<f64>],
        actions: &[Option<usize>],
    ) -> Result<f64> {
        let (qvals, _) = self.critic.q_values(agent, obs, actions)?;
        let probs = self.policies[agent].action_distribution(&obs[agent])?;
        if probs.len() != qvals.len() {
            return Err(Error::Dimension(format!(
                "policy has {} actions, critic has {}",
                probs.len(),
                qvals.len()
            )));
        }
        Ok(probs.iter().zip(&qvals).map(|(p, q)| p * q).sum())
    }

    /// One ascent step per policy; returns each agent's mean update signal
    /// (advantage plus entropy bonus at the sampled actions, or the value
    /// estimate for the straight-through variant).
    pub fn policy_update(
        &mut self,
        obs_batch: &[Vec<Vec<f64>>],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>> {
        if obs_batch.is_empty() {
            return Err(Error::Contract("policy update needs a non-empty minibatch".into()));
        }
        let n = self.num_agents();
        for joint in obs_batch {
            if joint.len() != n {
                return Err(Error::Dimension(format!(
                    "joint observation has {} slots, learner has {n}",
                    joint.len()
                )));
            }
        }
        if self.cfg.algorithm.uses_soft_policy_update() {
            self.soft_policy_update(obs_batch, rng)
        } else {
            self.straight_through_policy_update(obs_batch, rng)
        }
    }

    fn agent_obs_matrix(&self, obs_batch: &[Vec<Vec<f64>>], i: usize) -> Result<DenseMatrix> {
        let width = self.policies[i].obs_dim();
        let mut data = Vec::with_capacity(obs_batch.len() * width);
        for joint in obs_batch {
            if joint[i].len() != width {
                return Err(Error::Dimension(format!(
                    "agent {i}: observation has {} entries, expected {width}",
                    joint[i].len()
                )));
            }
            data.extend_from_slice(&joint[i]);
        }
        DenseMatrix::from_vec(obs_batch.len(), width, data)
    }

    fn soft_policy_update(
        &mut self,
        obs_batch: &[Vec<Vec<f64>>],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>> {
        let n = self.num_agents();
        let b = obs_batch.len();
        let inv_b = 1.0 / b as f64;

        // Resample every agent's action from its current policy.
        let mut caches = Vec::with_capacity(n);
        let mut probs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
        let mut logps: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut sampled: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut obs_mats = Vec::with_capacity(n);
        for i in 0..n {
            let x = self.agent_obs_matrix(obs_batch, i)?;
            let (logits, cache) = self.policies[i].logits(&x)?;
            let mut p_rows = Vec::with_capacity(b);
            let mut lp_rows = Vec::with_capacity(b);
            let mut a_rows = Vec::with_capacity(b);
            for r in 0..b {
                let p = softmax(logits.row(r))?;
                let lp = log_softmax(logits.row(r))?;
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut action = p.len() - 1;
                for (k, &pk) in p.iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        action = k;
                        break;
                    }
                }
                a_rows.push(action);
                lp_rows.push(lp[action]);
                p_rows.push(p);
            }
            caches.push(cache);
            probs.push(p_rows);
            logps.push(lp_rows);
            sampled.push(a_rows);
            obs_mats.push(x);
        }

        // Per-action value tables under the freshly sampled joint action;
        // the critic is an input here, not a gradient path.
        let (qtables, _) = self.critic.forward(&obs_mats, &sampled)?;

        let mut objectives = vec![0.0; n];
        for i in 0..n {
            let k = qtables[i].cols();
            let mut dlogits = DenseMatrix::zeros(b, k);
            for r in 0..b {
                let qrow = qtables[i].row(r);
                let p = &probs[i][r];
                let a = sampled[i][r];
                let baseline: f64 = p.iter().zip(qrow).map(|(pp, qq)| pp * qq).sum();
                let advantage = qrow[a] - baseline;
                let signal = advantage - self.cfg.temperature * logps[i][r];
                objectives[i] += signal * inv_b;
                let drow = dlogits.row_mut(r);
                for c in 0..k {
                    let indicator = if c == a { 1.0 } else { 0.0 };
                    drow[c] = -signal * (indicator - p[c]) * inv_b;
                }
            }
            self.policies[i].zero_grad();
            self.policies[i].backward_logits(&caches[i], &dlogits)?;
            self.policies[i].adam_step(self.cfg.lr);
        }
        Ok(objectives)
    }

    fn straight_through_policy_update(
        &mut self,
        obs_batch: &[Vec<Vec<f64>>],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>> {
        let n = self.num_agents();
        let b = obs_batch.len();
        let inv_b = 1.0 / b as f64;

        let mut caches = Vec::with_capacity(n);
        let mut relaxed: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
        let mut sampled: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut obs_mats = Vec::with_capacity(n);
        for i in 0..n {
            let x = self.agent_obs_matrix(obs_batch, i)?;
            let (logits, cache) = self.policies[i].logits(&x)?;
            let mut rows = Vec::with_capacity(b);
            let mut acts = Vec::with_capacity(b);
            for r in 0..b {
                let g = gumbel_softmax(logits.row(r), GUMBEL_TEMPERATURE, rng, true)?;
                acts.push(g.action);
                rows.push(g.relaxed);
            }
            caches.push(cache);
            relaxed.push(rows);
            sampled.push(acts);
            obs_mats.push(x);
        }

        let (qtables, _) = self.critic.forward(&obs_mats, &sampled)?;

        let mut objectives = vec![0.0; n];
        for i in 0..n {
            let k = qtables[i].cols();
            let mut dlogits = DenseMatrix::zeros(b, k);
            for r in 0..b {
                let qrow = qtables[i].row(r);
                objectives[i] += qrow[sampled[i][r]] * inv_b;
                // Maximize sum_k onehot_k q_k; straight-through routes the
                // gradient through the relaxed sample.
                let drelaxed: Vec<f64> = qrow.iter().map(|&q| -q * inv_b).collect();
                let dl = gumbel_softmax_backward(&relaxed[i][r], &drelaxed, GUMBEL_TEMPERATURE);
                dlogits.row_mut(r).copy_from_slice(&dl);
            }
            self.policies[i].zero_grad();
            self.policies[i].backward_logits(&caches[i], &dlogits)?;
            self.policies[i].adam_step(self.cfg.lr);
        }
        Ok(objectives)
    }

    /// Moves every target network a fraction tau toward its live twin.
    pub fn soft_update(&mut self) -> Result<()> {
        self.target_critic.soft_update_from(&self.critic, self.cfg.tau)?;
        for (target, live) in self.target_policies.iter_mut().zip(&self.policies) {
            target.soft_update_from(live, self.cfg.tau);
        }
        Ok(())
    }
}
