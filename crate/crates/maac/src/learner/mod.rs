//! Off-policy training: replay buffer, soft actor-critic updates with the
//! exact counterfactual baseline, target tracking, and the rollout loop.

pub mod buffer;
pub mod sac;
pub mod trainer;

pub use buffer::{ReplayBuffer, Transition};
pub use sac::Learner;
pub use trainer::{derive_seed, rollout_episode, EpisodeReport, RolloutStep, Trainer};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which of the four algorithm variants to train. They share one loop and
/// differ only in critic construction and, for `ddpg`, the policy update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Maac,
    MaacUniform,
    MaddpgSac,
    Ddpg,
}

impl Algorithm {
    pub fn all() -> [Algorithm; 4] {
        [Algorithm::Maac, Algorithm::MaacUniform, Algorithm::MaddpgSac, Algorithm::Ddpg]
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Maac => "maac",
            Algorithm::MaacUniform => "maac_uniform",
            Algorithm::MaddpgSac => "maddpg_sac",
            Algorithm::Ddpg => "ddpg",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maac" => Ok(Algorithm::Maac),
            "maac_uniform" => Ok(Algorithm::MaacUniform),
            "maddpg_sac" => Ok(Algorithm::MaddpgSac),
            "ddpg" => Ok(Algorithm::Ddpg),
            other => Err(Error::Config(format!(
                "unknown algorithm '{other}' (expected maac, maac_uniform, maddpg_sac, or ddpg)"
            ))),
        }
    }
}

/// Training hyperparameters. Defaults follow the reference configuration:
/// discount 0.99, target rate 0.005, entropy temperature 0.01, learning
/// rate 0.001, minibatches of 1024 from a one-million-step buffer, 12
/// parallel rollouts, and a 4+4 update block every 100 environment steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub tau: f64,
    pub temperature: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub num_envs: usize,
    pub episode_length: usize,
    pub steps_per_update: usize,
    pub critic_updates: usize,
    pub policy_updates: usize,
    pub heads: usize,
    pub hidden: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            tau: 0.005,
            temperature: 0.01,
            lr: 0.001,
            batch_size: 1024,
            buffer_capacity: 1_000_000,
            num_envs: 12,
            episode_length: 100,
            steps_per_update: 100,
            critic_updates: 4,
            policy_updates: 4,
            heads: 4,
            hidden: 128,
            algorithm: Algorithm::Maac,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1]", self.tau)));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(Error::Config(format!("temperature {} must be >= 0", self.temperature)));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::Config(format!("lr {} must be >= 0", self.lr)));
        }
        let counts = [
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("num_envs", self.num_envs),
            ("episode_length", self.episode_length),
            ("steps_per_update", self.steps_per_update),
            ("critic_updates", self.critic_updates),
            ("policy_updates", self.policy_updates),
            ("heads", self.heads),
            ("hidden", self.hidden),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.hidden % self.heads != 0 {
            return Err(Error::Config(format!(
                "heads {} must divide hidden {}",
                self.heads, self.hidden
            )));
        }
        Ok(())
    }
}
