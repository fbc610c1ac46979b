//! Attention-based centralized critics for multi-agent actor-critic
//! training, plus the 2-D particle-world tasks they are evaluated on.
//!
//! Start with the `examples/` directory; each example exercises one
//! capability end to end. The high-level flow is: describe an experiment
//! with a [`cli::ExperimentConfig`], build a [`learner::Trainer`] from its
//! environment and learner sections, and call `run`. Everything below that
//! (networks, attention, replay, optimization) is hand-rolled on a small
//! dense-matrix kernel in [`numcore`] so that every gradient can be
//! checked by finite differences.

pub mod agents;
pub mod cli;
pub mod critics;
pub mod envsim;
pub mod error;
pub mod learner;
pub mod numcore;

pub use error::{Error, Result};
