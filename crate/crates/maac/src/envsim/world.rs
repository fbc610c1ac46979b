//! Entity descriptions, world state and task configuration shared by the
//! three particle-world tasks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::physics::PhysicsConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Hunter,
    Bank,
    Rover,
    Tower,
    Landmark,
    Treasure,
    GenericAgent,
}

impl EntityKind {
    /// Bodies that exert contact forces on each other.
    pub fn collides(self) -> bool {
        matches!(self, EntityKind::Hunter | EntityKind::Rover | EntityKind::GenericAgent)
    }

    /// Entities that receive an action slot.
    pub fn action_controlled(self) -> bool {
        matches!(
            self,
            EntityKind::Hunter
                | EntityKind::Bank
                | EntityKind::Rover
                | EntityKind::Tower
                | EntityKind::GenericAgent
        )
    }
}

/// Static description of one body in the world.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntitySpec {
    pub id: usize,
    pub kind: EntityKind,
    pub radius: f64,
    pub movable: bool,
    /// Treasure/bank color index; 0 for uncolored entities.
    pub color_tag: usize,
}

/// Dynamic state of the world at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    /// Rover-Tower: entity index of the tower paired with each rover.
    pub pairings: Vec<usize>,
    /// Rover-Tower: entity index of each rover's goal landmark.
    pub goals: Vec<usize>,
    /// Rover-Tower: last message chosen by each tower; the paired rover
    /// sees it one step later.
    pub messages: Vec<Option<usize>>,
    /// Treasure collection: alive flag per treasure. Collected treasures
    /// respawn immediately, so these stay true; kept for schema clarity.
    pub treasure_alive: Vec<bool>,
    /// Treasure collection: color carried by each hunter, if any.
    pub carrying: Vec<Option<usize>>,
    pub step_index: usize,
}

impl WorldState {
    pub fn empty(num_entities: usize) -> Self {
        WorldState {
            positions: vec![[0.0, 0.0]; num_entities],
            velocities: vec![[0.0, 0.0]; num_entities],
            pairings: Vec::new(),
            goals: Vec::new(),
            messages: Vec::new(),
            treasure_alive: Vec::new(),
            carrying: Vec::new(),
            step_index: 0,
        }
    }
}

/// One discrete action index per agent slot.
pub type JointAction = Vec<usize>;

/// Everything `step` returns: next observations, per-agent rewards and a
/// snapshot of the post-step world.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepResult {
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub next_state: WorldState,
}

/// Task selector plus the agent counts that shape it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    /// Hunters collect treasures and deposit them into color-matched banks.
    Ctc { hunters: usize, banks: usize, treasures: usize },
    /// Blind rovers guided toward goals by messages from paired towers.
    RoverTower { pairs: usize },
    /// Agents cover landmarks under a shared distance cost.
    CoopNav { agents: usize },
}

impl TaskConfig {
    pub fn label(&self) -> &'static str {
        match self {
            TaskConfig::Ctc { .. } => "ctc",
            TaskConfig::RoverTower { .. } => "rover_tower",
            TaskConfig::CoopNav { .. } => "coop_nav",
        }
    }
}

/// Reward constants; the tasks define structure, these set magnitudes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub collect: f64,
    pub deposit: f64,
    pub collide: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { collect: 5.0, deposit: 5.0, collide: 1.0 }
    }
}

fn default_episode_length() -> usize {
    100
}

/// Full environment configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub task: TaskConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default = "default_episode_length")]
    pub episode_length: usize,
}

impl EnvConfig {
    pub fn new(task: TaskConfig) -> Self {
        EnvConfig {
            task,
            physics: PhysicsConfig::default(),
            reward: RewardConfig::default(),
            episode_length: default_episode_length(),
        }
    }

    /// Stock configuration for a task by name: "ctc" (6 hunters, 2 banks,
    /// 6 treasures), "rover_tower" (4 pairs) or "coop_nav" (3 agents).
    pub fn default_for(task_name: &str) -> Result<Self> {
        let task = match task_name {
            "ctc" => TaskConfig::Ctc { hunters: 6, banks: 2, treasures: 6 },
            "rover_tower" => TaskConfig::RoverTower { pairs: 4 },
            "coop_nav" => TaskConfig::CoopNav { agents: 3 },
            other => {
                return Err(Error::Config(format!(
                    "unknown task '{other}' (expected ctc, rover_tower or coop_nav)"
                )))
            }
        };
        Ok(EnvConfig::new(task))
    }
}
