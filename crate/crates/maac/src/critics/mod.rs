//! Centralized critics. All variants expose the same shape of interface:
//! batched per-action value tables and a single-state `q_values` query,
//! so the learner never branches on architecture beyond construction.

pub mod attention;
pub mod concat;

pub use attention::{AttentionCritic, AttentionTrace, CriticCache};
pub use concat::{ConcatCache, ConcatCritic};

use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{DenseMatrix, ParamTensor};

/// Which critic to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriticArch {
    /// Multi-head attention over the other agents' embeddings.
    Attention { heads: usize, uniform: bool },
    /// Flat concatenation of all observations and other agents' actions.
    Central,
    /// Own observation only.
    Decentralized,
}

pub enum EvalCache {
    Attention(CriticCache),
    Concat(ConcatCache),
}

pub enum Critic {
    Attention(AttentionCritic),
    Concat(ConcatCritic),
}

impl Clone for Critic {
    fn clone(&self) -> Self {
        match self {
            Critic::Attention(c) => Critic::Attention(c.clone()),
            Critic::Concat(c) => Critic::Concat(c.clone()),
        }
    }
}

impl Critic {
    pub fn new(
        arch: CriticArch,
        obs_dims: &[usize],
        action_dims: &[usize],
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        match arch {
            CriticArch::Attention { heads, uniform } => Ok(Critic::Attention(
                AttentionCritic::new(obs_dims, action_dims, hidden, heads, uniform, rng)?,
            )),
            CriticArch::Central => Ok(Critic::Concat(ConcatCritic::new(
                obs_dims,
                action_dims,
                hidden,
                false,
                rng,
            )?)),
            CriticArch::Decentralized => Ok(Critic::Concat(ConcatCritic::new(
                obs_dims,
                action_dims,
                hidden,
                true,
                rng,
            )?)),
        }
    }

    pub fn num_agents(&self) -> usize {
        match self {
            Critic::Attention(c) => c.num_agents(),
            Critic::Concat(c) => c.num_agents(),
        }
    }

    pub fn action_dims(&self) -> &[usize] {
        match self {
            Critic::Attention(c) => c.action_dims(),
            Critic::Concat(c) => c.action_dims(),
        }
    }

    pub fn has_attention(&self) -> bool {
        matches!(self, Critic::Attention(_))
    }

    pub fn forward(
        &self,
        obs: &[DenseMatrix],
        actions: &[Vec<usize>],
    ) -> Result<(Vec<DenseMatrix>, EvalCache)> {
        match self {
            Critic::Attention(c) => {
                let (q, cache) = c.forward(obs, actions)?;
                Ok((q, EvalCache::Attention(cache)))
            }
            Critic::Concat(c) => {
                let (q, cache) = c.forward(obs, actions)?;
                Ok((q, EvalCache::Concat(cache)))
            }
        }
    }

    pub fn backward(&mut self, cache: &EvalCache, dq: &[DenseMatrix]) -> Result<()> {
        match (self, cache) {
            (Critic::Attention(c), EvalCache::Attention(cache)) => c.backward(cache, dq),
            (Critic::Concat(c), EvalCache::Concat(cache)) => c.backward(cache, dq),
            _ => Err(Error::Contract("cache built by a different critic architecture".into())),
        }
    }

    /// Attention weights from a forward pass, when the architecture has any.
    pub fn trace(&self, cache: &EvalCache) -> Option<AttentionTrace> {
        match (self, cache) {
            (Critic::Attention(c), EvalCache::Attention(cache)) => Some(c.trace(cache)),
            _ => None,
        }
    }

    pub fn q_values(
        &self,
        agent: usize,
        obs: &[Vec<f64>],
        actions: &[Option<usize>],
    ) -> Result<(Vec<f64>, Option<AttentionTrace>)> {
        match self {
            Critic::Attention(c) => {
                let (q, trace) = c.q_values(agent, obs, actions)?;
                Ok((q, Some(trace)))
            }
            Critic::Concat(c) => Ok((c.q_values(agent, obs, actions)?, None)),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        match self {
            Critic::Attention(c) => c.params_mut(),
            Critic::Concat(c) => c.params_mut(),
        }
    }

    pub fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        match self {
            Critic::Attention(c) => c.named_params(),
            Critic::Concat(c) => c.named_params(),
        }
    }

    pub fn zero_grad(&mut self) {
        match self {
            Critic::Attention(c) => c.zero_grad(),
            Critic::Concat(c) => c.zero_grad(),
        }
    }

    pub fn adam_step(&mut self, lr: f64) {
        match self {
            Critic::Attention(c) => c.adam_step(lr),
            Critic::Concat(c) => c.adam_step(lr),
        }
    }

    pub fn soft_update_from(&mut self, live: &Critic, tau: f64) -> Result<()> {
        match (self, live) {
            (Critic::Attention(t), Critic::Attention(l)) => {
                t.soft_update_from(l, tau);
                Ok(())
            }
            (Critic::Concat(t), Critic::Concat(l)) => {
                t.soft_update_from(l, tau);
                Ok(())
            }
            _ => Err(Error::Contract("target and live critic architectures differ".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_architectures_share_the_query_interface() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = vec![vec![0.1, 0.2], vec![-0.3, 0.4]];
        let actions = vec![Some(1), Some(0)];
        for arch in [
            CriticArch::Attention { heads: 2, uniform: false },
            CriticArch::Attention { heads: 2, uniform: true },
            CriticArch::Central,
            CriticArch::Decentralized,
        ] {
            let critic = Critic::new(arch, &[2, 2], &[3, 3], 8, &mut rng).unwrap();
            let (q, trace) = critic.q_values(0, &obs, &actions).unwrap();
            assert_eq!(q.len(), 3);
            assert_eq!(trace.is_some(), critic.has_attention());
        }
    }

    #[test]
    fn mismatched_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let attn = Critic::new(
            CriticArch::Attention { heads: 1, uniform: false },
            &[2],
            &[2],
            4,
            &mut rng,
        )
        .unwrap();
        let mut central =
            Critic::new(CriticArch::Central, &[2], &[2], 4, &mut rng).unwrap();
        let obs = vec![DenseMatrix::from_row(&[0.5, -0.5])];
        let acts = vec![vec![0]];
        let (q, cache) = attn.forward(&obs, &acts).unwrap();
        let err = central.backward(&cache, &q).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn soft_update_moves_target_toward_live() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let live = Critic::new(CriticArch::Central, &[2], &[2], 4, &mut rng).unwrap();
        let mut target = Critic::new(CriticArch::Central, &[2], &[2], 4, &mut rng).unwrap();
        let before: Vec<f64> = target.named_params()[0].1.value.data().to_vec();
        target.soft_update_from(&live, 0.5).unwrap();
        let after = target.named_params()[0].1.value.data().to_vec();
        let live_vals = live.named_params()[0].1.value.data().to_vec();
        for ((b, a), l) in before.iter().zip(&after).zip(&live_vals) {
            assert!((a - (0.5 * b + 0.5 * l)).abs() < 1e-15);
        }
    }
}
