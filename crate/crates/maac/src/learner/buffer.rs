//! FIFO replay buffer with uniform sampling.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One joint environment step as stored for off-policy learning. Episodes
/// end by time limit only, so there is no terminal flag; targets always
/// bootstrap.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_observations: Vec<Vec<f64>>,
}

impl Transition {
    pub fn num_agents(&self) -> usize {
        self.actions.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.actions.len();
        if n == 0
            || self.observations.len() != n
            || self.rewards.len() != n
            || self.next_observations.len() != n
        {
            return Err(Error::Dimension(format!(
                "transition slots disagree: {} obs, {} actions, {} rewards, {} next obs",
                self.observations.len(),
                self.actions.len(),
                self.rewards.len(),
                self.next_observations.len()
            )));
        }
        let finite = self
            .observations
            .iter()
            .chain(self.next_observations.iter())
            .flatten()
            .chain(self.rewards.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("transition holds a non-finite value".into()));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
    num_agents: Option<usize>,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            items: VecDeque::with_capacity(capacity.min(1 << 20)),
            capacity,
            num_agents: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends a transition, evicting the oldest one at capacity.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        t.validate()?;
        match self.num_agents {
            None => self.num_agents = Some(t.num_agents()),
            Some(n) if n != t.num_agents() => {
                return Err(Error::Dimension(format!(
                    "buffer holds {n}-agent transitions, got one with {}",
                    t.num_agents()
                )))
            }
            _ => {}
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        Ok(())
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }

    /// Uniform sample with replacement over current contents.
    pub fn sample(&mut self, batch: usize) -> Result<Vec<&Transition>> {
        if self.items.is_empty() {
            return Err(Error::Contract("cannot sample from an empty replay buffer".into()));
        }
        if batch == 0 {
            return Err(Error::Contract("cannot sample an empty minibatch".into()));
        }
        let len = self.items.len();
        let indices: Vec<usize> = (0..batch).map(|_| self.rng.gen_range(0..len)).collect();
        Ok(indices.into_iter().map(|i| &self.items[i]).collect())
    }
}
