//! Rollout/update orchestration: parallel environment stepping into the
//! replay buffer, periodic update blocks, and per-episode reporting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agents::PolicyNet;
use crate::envsim::{EnvConfig, Environment};
use crate::error::{Error, Result};

use super::buffer::{ReplayBuffer, Transition};
use super::sac::Learner;
use super::TrainConfig;

/// Deterministic stream splitting so every consumer of randomness gets an
/// independent, reproducible seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything worth logging about one finished episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeReport {
    pub episode: usize,
    pub env_index: usize,
    pub agent_returns: Vec<f64>,
    pub team_return: f64,
    /// Most recent critic loss; absent until the first update block.
    pub critic_loss: Option<f64>,
    pub policy_objectives: Vec<f64>,
    /// Mean attention entropy per agent and head; empty without attention.
    pub attention_entropy: Vec<Vec<f64>>,
    pub total_env_steps: usize,
}

/// One recorded step of an evaluation rollout.
#[derive(Clone, Debug)]
pub struct RolloutStep {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

/// Plays one episode with the given policies (sampling actions), returning
/// per-agent returns and, when `record` is set, the full step trace.
pub fn rollout_episode(
    policies: &[PolicyNet],
    env: &mut Environment,
    seed: u64,
    rng: &mut ChaCha8Rng,
    record: bool,
) -> Result<(Vec<f64>, Vec<RolloutStep>)> {
    let mut obs = env.reset(seed);
    let n = env.num_agents();
    let mut returns = vec![0.0; n];
    let mut steps = Vec::new();
    for _ in 0..env.episode_length() {
        let mut actions = Vec::with_capacity(n);
        for i in 0..n {
            actions.push(policies[i].sample(&obs[i], rng)?.action);
        }
        let result = env.step(&actions)?;
        for (acc, r) in returns.iter_mut().zip(&result.rewards) {
            *acc += *r;
        }
        if record {
            steps.push(RolloutStep {
                observations: obs,
                actions,
                rewards: result.rewards,
            });
        }
        obs = result.observations;
    }
    Ok((returns, steps))
}

struct EnvSlot {
    env: Environment,
    rng: ChaCha8Rng,
    obs: Vec<Vec<f64>>,
    returns: Vec<f64>,
}

pub struct Trainer {
    learner: Learner,
    slots: Vec<EnvSlot>,
    buffer: ReplayBuffer,
    single_thread: bool,
    update_rng: ChaCha8Rng,
    t_update: usize,
    episodes_done: usize,
    total_env_steps: usize,
    rounds_done: u64,
    update_blocks: usize,
    last_critic_loss: Option<f64>,
    last_policy_objectives: Vec<f64>,
}

impl Trainer {
    /// Builds environments, networks, and the buffer from one seed. The
    /// environment's episode length is driven by the train config so the
    /// two never disagree.
    pub fn new(env_cfg: EnvConfig, train_cfg: TrainConfig, single_thread: bool) -> Result<Self> {
        train_cfg.validate()?;
        let mut env_cfg = env_cfg;
        env_cfg.episode_length = train_cfg.episode_length;
        let probe = Environment::new(env_cfg.clone())?;
        let obs_dims = probe.obs_sizes();
        let action_dims = probe.action_sizes();
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(train_cfg.seed, 1));
        let learner = Learner::new(&obs_dims, &action_dims, &train_cfg, &mut init_rng)?;
        let buffer =
            ReplayBuffer::new(train_cfg.buffer_capacity, derive_seed(train_cfg.seed, 2))?;
        let update_rng = ChaCha8Rng::seed_from_u64(derive_seed(train_cfg.seed, 3));
        let slots = (0..train_cfg.num_envs)
            .map(|i| {
                Ok(EnvSlot {
                    env: Environment::new(env_cfg.clone())?,
                    rng: ChaCha8Rng::seed_from_u64(derive_seed(train_cfg.seed, 100 + i as u64)),
                    obs: Vec::new(),
                    returns: Vec::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Trainer {
            learner,
            slots,
            buffer,
            single_thread,
            update_rng,
            t_update: 0,
            episodes_done: 0,
            total_env_steps: 0,
            rounds_done: 0,
            update_blocks: 0,
            last_critic_loss: None,
            last_policy_objectives: Vec::new(),
        })
    }

    /// Swaps in a learner restored from a checkpoint and fast-forwards the
    /// counters so episode seeding continues on schedule. The replay buffer
    /// starts empty, so updates resume once it refills.
    pub fn restore(
        &mut self,
        learner: Learner,
        episodes_done: usize,
        total_env_steps: usize,
    ) -> Result<()> {
        if learner.num_agents() != self.learner.num_agents() {
            return Err(Error::Contract(format!(
                "restored learner has {} agents, environment has {}",
                learner.num_agents(),
                self.learner.num_agents()
            )));
        }
        self.learner = learner;
        self.episodes_done = episodes_done;
        self.total_env_steps = total_env_steps;
        self.rounds_done = episodes_done.div_ceil(self.slots.len()) as u64;
        Ok(())
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn learner_mut(&mut self) -> &mut Learner {
        &mut self.learner
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn total_env_steps(&self) -> usize {
        self.total_env_steps
    }

    pub fn update_blocks(&self) -> usize {
        self.update_blocks
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    fn step_all(&mut self) -> Result<Vec<Transition>> {
        let policies = self.learner.policies();
        let step_one = |slot: &mut EnvSlot| -> Result<Transition> {
            let n = slot.env.num_agents();
            let mut actions = Vec::with_capacity(n);
            for i in 0..n {
                actions.push(policies[i].sample(&slot.obs[i], &mut slot.rng)?.action);
            }
            let result = slot.env.step(&actions)?;
            for (acc, r) in slot.returns.iter_mut().zip(&result.rewards) {
                *acc += *r;
            }
            let transition = Transition {
                observations: std::mem::take(&mut slot.obs),
                actions,
                rewards: result.rewards,
                next_observations: result.observations.clone(),
            };
            slot.obs = result.observations;
            Ok(transition)
        };
        if self.single_thread {
            self.slots.iter_mut().map(step_one).collect()
        } else {
            self.slots.par_iter_mut().map(step_one).collect()
        }
    }

    fn update_block(&mut self) -> Result<()> {
        let critic_updates = self.learner.config().critic_updates;
        let policy_updates = self.learner.config().policy_updates;
        let batch_size = self.learner.config().batch_size;
        for _ in 0..critic_updates {
            let batch = self.buffer.sample(batch_size)?;
            self.last_critic_loss =
                Some(self.learner.critic_update(&batch, &mut self.update_rng)?);
        }
        for _ in 0..policy_updates {
            let batch = self.buffer.sample(batch_size)?;
            let obs: Vec<Vec<Vec<f64>>> =
                batch.iter().map(|t| t.observations.clone()).collect();
            self.last_policy_objectives =
                self.learner.policy_update(&obs, &mut self.update_rng)?;
        }
        self.learner.soft_update()?;
        self.update_blocks += 1;
        Ok(())
    }

    /// Runs one synchronized episode in every environment, interleaving
    /// update blocks whenever enough fresh steps have accumulated, and
    /// emits one report per finished episode.
    pub fn run_round(&mut self, sink: &mut dyn FnMut(EpisodeReport)) -> Result<()> {
        let episode_length = self.learner.config().episode_length;
        let steps_per_update = self.learner.config().steps_per_update;
        let batch_size = self.learner.config().batch_size;
        let seed = self.learner.config().seed;
        let n_agents = self.learner.num_agents();
        let num_envs = self.slots.len();

        for (idx, slot) in self.slots.iter_mut().enumerate() {
            let episode_seed = derive_seed(derive_seed(seed, 1000 + idx as u64), self.rounds_done);
            slot.obs = slot.env.reset(episode_seed);
            slot.returns = vec![0.0; n_agents];
        }
        for _ in 0..episode_length {
            let transitions = self.step_all()?;
            for t in transitions {
                self.buffer.push(t)?;
            }
            self.t_update += num_envs;
            self.total_env_steps += num_envs;
            if self.t_update >= steps_per_update && self.buffer.len() >= batch_size {
                self.update_block()?;
                self.t_update = 0;
            }
        }
        for (idx, slot) in self.slots.iter().enumerate() {
            let team = slot.returns.iter().sum::<f64>() / n_agents as f64;
            sink(EpisodeReport {
                episode: self.episodes_done,
                env_index: idx,
                agent_returns: slot.returns.clone(),
                team_return: team,
                critic_loss: self.last_critic_loss,
                policy_objectives: self.last_policy_objectives.clone(),
                attention_entropy: self.learner.last_attention_entropy().to_vec(),
                total_env_steps: self.total_env_steps,
            });
            self.episodes_done += 1;
        }
        self.rounds_done += 1;
        Ok(())
    }

    /// Runs rounds until at least `episodes` episodes have finished.
    pub fn run(&mut self, episodes: usize, sink: &mut dyn FnMut(EpisodeReport)) -> Result<()> {
        while self.episodes_done < episodes {
            self.run_round(sink)?;
        }
        Ok(())
    }
}
