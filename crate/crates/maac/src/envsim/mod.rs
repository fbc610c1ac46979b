//! 2-D particle world with three tasks: Cooperative Treasure Collection,
//! Rover-Tower and Cooperative Navigation.

pub mod env;
pub mod physics;
pub mod world;

pub use env::{Environment, MESSAGE_ACTION_NAMES, MOVE_ACTION_NAMES, NUM_ACTIONS};
pub use physics::{physics_step, PhysicsConfig};
pub use world::{
    EntityKind, EntitySpec, EnvConfig, JointAction, RewardConfig, StepResult, TaskConfig,
    WorldState,
};
