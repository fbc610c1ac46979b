//! Per-agent stochastic policies and the Gumbel-Softmax relaxation used by
//! the deterministic-policy baseline.

pub mod gumbel;
pub mod policy;

pub use gumbel::{
    gumbel_softmax, gumbel_softmax_backward, relaxed_from_noise, sample_gumbel, GumbelSample,
};
pub use policy::{ActionSample, PolicyCache, PolicyNet};
