//! Environment construction, reset/step and the per-task observation and
//! reward functions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::physics::physics_step;
use super::world::{
    EntityKind, EntitySpec, EnvConfig, StepResult, TaskConfig, WorldState,
};

/// Every agent in every task picks among 5 discrete actions: the four
/// axis movements plus stay, or the five messages for towers.
pub const NUM_ACTIONS: usize = 5;

pub const MOVE_ACTION_NAMES: [&str; NUM_ACTIONS] = ["up", "down", "left", "right", "stay"];
pub const MESSAGE_ACTION_NAMES: [&str; NUM_ACTIONS] = ["msg0", "msg1", "msg2", "msg3", "msg4"];

fn move_force(action: usize, gain: f64) -> [f64; 2] {
    match action {
        0 => [0.0, gain],
        1 => [0.0, -gain],
        2 => [-gain, 0.0],
        3 => [gain, 0.0],
        _ => [0.0, 0.0],
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// One task instance. Agents occupy the first `num_agents` entity slots,
/// so an agent's slot index doubles as its entity index.
#[derive(Clone, Debug)]
pub struct Environment {
    config: EnvConfig,
    entities: Vec<EntitySpec>,
    state: WorldState,
    rng: ChaCha8Rng,
    num_agents: usize,
}

impl Environment {
    pub fn new(config: EnvConfig) -> Result<Self> {
        let entities = build_entities(&config)?;
        let num_agents = entities.iter().filter(|e| e.kind.action_controlled()).count();
        let n = entities.len();
        Ok(Environment {
            config,
            entities,
            state: WorldState::empty(n),
            rng: ChaCha8Rng::seed_from_u64(0),
            num_agents,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn entities(&self) -> &[EntitySpec] {
        &self.entities
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn episode_length(&self) -> usize {
        self.config.episode_length
    }

    pub fn action_sizes(&self) -> Vec<usize> {
        vec![NUM_ACTIONS; self.num_agents]
    }

    /// Human-readable action names for one agent slot.
    pub fn action_names(&self, slot: usize) -> [&'static str; NUM_ACTIONS] {
        if self.entities[slot].kind == EntityKind::Tower {
            MESSAGE_ACTION_NAMES
        } else {
            MOVE_ACTION_NAMES
        }
    }

    /// Observation length per agent slot; constant over an episode.
    pub fn obs_sizes(&self) -> Vec<usize> {
        (0..self.num_agents).map(|s| self.obs_size(s)).collect()
    }

    fn obs_size(&self, slot: usize) -> usize {
        match self.config.task {
            TaskConfig::Ctc { hunters, banks, treasures } => {
                4 + banks + (hunters + banks - 1) * (2 + banks) + treasures * (2 + banks)
            }
            TaskConfig::RoverTower { pairs } => {
                if slot < pairs {
                    2 + NUM_ACTIONS
                } else {
                    4
                }
            }
            TaskConfig::CoopNav { agents } => 4 + 2 * agents + 2 * (agents - 1),
        }
    }

    /// Reseeds the episode RNG and redraws the world: uniform positions,
    /// zero velocities, fresh pairings/goals (Rover-Tower), all treasures
    /// alive and nothing carried (treasure collection).
    pub fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let a = self.config.physics.arena_half;
        let n = self.entities.len();
        self.state = WorldState::empty(n);
        for i in 0..n {
            self.state.positions[i] =
                [self.rng.gen_range(-a..=a), self.rng.gen_range(-a..=a)];
        }
        match self.config.task {
            TaskConfig::Ctc { hunters, treasures, .. } => {
                self.state.treasure_alive = vec![true; treasures];
                self.state.carrying = vec![None; hunters];
            }
            TaskConfig::RoverTower { pairs } => {
                let mut towers: Vec<usize> = (pairs..2 * pairs).collect();
                towers.shuffle(&mut self.rng);
                self.state.pairings = towers;
                let mut goals: Vec<usize> = (2 * pairs..3 * pairs).collect();
                goals.shuffle(&mut self.rng);
                self.state.goals = goals;
                self.state.messages = vec![None; pairs];
            }
            TaskConfig::CoopNav { .. } => {}
        }
        self.observe_all()
    }

    /// Applies one joint action: forces and physics, then task events and
    /// rewards, then message bookkeeping. The returned observations are
    /// the post-step ones, so a message sent this step is visible in them.
    pub fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        if actions.len() != self.num_agents {
            return Err(Error::Dimension(format!(
                "expected {} actions, got {}",
                self.num_agents,
                actions.len()
            )));
        }
        if self.state.step_index >= self.config.episode_length {
            return Err(Error::Contract(format!(
                "episode finished ({} steps); reset before stepping again",
                self.config.episode_length
            )));
        }
        for (slot, &a) in actions.iter().enumerate() {
            if a >= NUM_ACTIONS {
                return Err(Error::Action { agent: slot, action: a, limit: NUM_ACTIONS });
            }
        }

        let mut applied = vec![[0.0f64; 2]; self.entities.len()];
        for slot in 0..self.num_agents {
            if self.entities[slot].movable {
                applied[slot] = move_force(actions[slot], self.config.physics.force_gain);
            }
        }
        physics_step(
            &self.config.physics,
            &self.entities,
            &mut self.state.positions,
            &mut self.state.velocities,
            &applied,
        );

        let rewards = match self.config.task {
            TaskConfig::Ctc { .. } => self.ctc_events_and_rewards(),
            TaskConfig::RoverTower { pairs } => {
                for t in 0..pairs {
                    self.state.messages[t] = Some(actions[pairs + t]);
                }
                self.rover_tower_rewards()
            }
            TaskConfig::CoopNav { .. } => self.coop_nav_rewards(),
        };

        self.state.step_index += 1;
        Ok(StepResult {
            observations: self.observe_all(),
            rewards,
            next_state: self.state.clone(),
        })
    }

    pub fn observe_all(&self) -> Vec<Vec<f64>> {
        (0..self.num_agents).map(|s| self.observe(s)).collect()
    }

    pub fn observe(&self, slot: usize) -> Vec<f64> {
        let o = match self.config.task {
            TaskConfig::Ctc { hunters, banks, treasures } => {
                self.observe_ctc(slot, hunters, banks, treasures)
            }
            TaskConfig::RoverTower { pairs } => self.observe_rt(slot, pairs),
            TaskConfig::CoopNav { agents } => self.observe_cn(slot, agents),
        };
        debug_assert_eq!(o.len(), self.obs_size(slot));
        o
    }

    fn push_rel(&self, o: &mut Vec<f64>, own: usize, other: usize) {
        let p = self.state.positions[own];
        let q = self.state.positions[other];
        o.push(q[0] - p[0]);
        o.push(q[1] - p[1]);
    }

    fn observe_ctc(
        &self,
        slot: usize,
        hunters: usize,
        banks: usize,
        treasures: usize,
    ) -> Vec<f64> {
        let p = self.state.positions[slot];
        let v = self.state.velocities[slot];
        let mut o = vec![p[0], p[1], v[0], v[1]];
        let carry_base = o.len();
        o.resize(carry_base + banks, 0.0);
        if slot < hunters {
            if let Some(c) = self.state.carrying[slot] {
                o[carry_base + c] = 1.0;
            }
        }
        for j in 0..hunters + banks {
            if j == slot {
                continue;
            }
            self.push_rel(&mut o, slot, j);
            let base = o.len();
            o.resize(base + banks, 0.0);
            if self.entities[j].kind == EntityKind::Bank {
                o[base + self.entities[j].color_tag] = 1.0;
            }
        }
        for t in 0..treasures {
            let te = hunters + banks + t;
            self.push_rel(&mut o, slot, te);
            let base = o.len();
            o.resize(base + banks, 0.0);
            o[base + self.entities[te].color_tag] = 1.0;
        }
        o
    }

    fn observe_rt(&self, slot: usize, pairs: usize) -> Vec<f64> {
        if slot < pairs {
            // Rovers are blind: own velocity plus the latest message from
            // the paired tower is all they get.
            let v = self.state.velocities[slot];
            let mut o = vec![v[0], v[1]];
            let base = o.len();
            o.resize(base + NUM_ACTIONS, 0.0);
            let tower_slot = self.state.pairings[slot] - pairs;
            if let Some(m) = self.state.messages[tower_slot] {
                o[base + m] = 1.0;
            }
            o
        } else {
            let rover = (0..pairs)
                .find(|&r| self.state.pairings[r] == slot)
                .expect("pairings form a bijection");
            let mut o = Vec::with_capacity(4);
            self.push_rel(&mut o, slot, rover);
            self.push_rel(&mut o, slot, self.state.goals[rover]);
            o
        }
    }

    fn observe_cn(&self, slot: usize, agents: usize) -> Vec<f64> {
        let p = self.state.positions[slot];
        let v = self.state.velocities[slot];
        let mut o = vec![p[0], p[1], v[0], v[1]];
        for l in agents..2 * agents {
            self.push_rel(&mut o, slot, l);
        }
        for j in 0..agents {
            if j != slot {
                self.push_rel(&mut o, slot, j);
            }
        }
        o
    }

    fn overlapping(&self, i: usize, j: usize) -> bool {
        dist(self.state.positions[i], self.state.positions[j])
            < self.entities[i].radius + self.entities[j].radius
    }

    fn ctc_events_and_rewards(&mut self) -> Vec<f64> {
        let (hunters, banks, treasures) = match self.config.task {
            TaskConfig::Ctc { hunters, banks, treasures } => (hunters, banks, treasures),
            _ => unreachable!(),
        };
        let mut rewards = vec![0.0; hunters + banks];
        let rc = self.config.reward.clone();

        // Deposits are settled before collections so a hunter can hand
        // off and immediately pick up a new treasure.
        let mut deposits = 0usize;
        for h in 0..hunters {
            if let Some(color) = self.state.carrying[h] {
                let at_bank = (hunters..hunters + banks)
                    .any(|b| self.entities[b].color_tag == color && self.overlapping(h, b));
                if at_bank {
                    self.state.carrying[h] = None;
                    deposits += 1;
                }
            }
        }

        let mut collections = 0usize;
        let a = self.config.physics.arena_half;
        for t in 0..treasures {
            let te = hunters + banks + t;
            if !self.state.treasure_alive[t] {
                continue;
            }
            let collector = (0..hunters)
                .find(|&h| self.state.carrying[h].is_none() && self.overlapping(h, te));
            if let Some(h) = collector {
                self.state.carrying[h] = Some(self.entities[te].color_tag);
                self.state.positions[te] =
                    [self.rng.gen_range(-a..=a), self.rng.gen_range(-a..=a)];
                collections += 1;
            }
        }

        for r in rewards.iter_mut().take(hunters) {
            *r += collections as f64 * rc.collect;
        }
        for r in rewards.iter_mut() {
            *r += deposits as f64 * rc.deposit;
        }
        for i in 0..hunters {
            for j in (i + 1)..hunters {
                if self.overlapping(i, j) {
                    rewards[i] -= rc.collide;
                    rewards[j] -= rc.collide;
                }
            }
        }
        rewards
    }

    fn rover_tower_rewards(&self) -> Vec<f64> {
        let pairs = match self.config.task {
            TaskConfig::RoverTower { pairs } => pairs,
            _ => unreachable!(),
        };
        let mut rewards = vec![0.0; 2 * pairs];
        for r in 0..pairs {
            let d = dist(
                self.state.positions[r],
                self.state.positions[self.state.goals[r]],
            );
            rewards[r] = -d;
            rewards[self.state.pairings[r]] = -d;
        }
        rewards
    }

    fn coop_nav_rewards(&self) -> Vec<f64> {
        let agents = match self.config.task {
            TaskConfig::CoopNav { agents } => agents,
            _ => unreachable!(),
        };
        let mut shared = 0.0;
        for l in agents..2 * agents {
            let min_d = (0..agents)
                .map(|a| dist(self.state.positions[a], self.state.positions[l]))
                .fold(f64::INFINITY, f64::min);
            shared -= min_d;
        }
        let mut rewards = vec![shared; agents];
        for i in 0..agents {
            for j in (i + 1)..agents {
                if self.overlapping(i, j) {
                    rewards[i] -= self.config.reward.collide;
                    rewards[j] -= self.config.reward.collide;
                }
            }
        }
        rewards
    }
}

fn build_entities(config: &EnvConfig) -> Result<Vec<EntitySpec>> {
    let ph = &config.physics;
    let mut out = Vec::new();
    let push = |out: &mut Vec<EntitySpec>, kind, radius, movable, color_tag| {
        let id = out.len();
        out.push(EntitySpec { id, kind, radius, movable, color_tag });
    };
    match config.task {
        TaskConfig::Ctc { hunters, banks, treasures } => {
            if hunters == 0 || banks == 0 || treasures == 0 {
                return Err(Error::Config(
                    "ctc needs at least one hunter, one bank and one treasure".to_string(),
                ));
            }
            for _ in 0..hunters {
                push(&mut out, EntityKind::Hunter, ph.agent_radius, true, 0);
            }
            for b in 0..banks {
                push(&mut out, EntityKind::Bank, ph.station_radius, true, b);
            }
            for t in 0..treasures {
                push(&mut out, EntityKind::Treasure, ph.agent_radius, false, t % banks);
            }
        }
        TaskConfig::RoverTower { pairs } => {
            if pairs == 0 {
                return Err(Error::Config("rover_tower needs at least one pair".to_string()));
            }
            for _ in 0..pairs {
                push(&mut out, EntityKind::Rover, ph.agent_radius, true, 0);
            }
            for _ in 0..pairs {
                push(&mut out, EntityKind::Tower, ph.station_radius, false, 0);
            }
            for _ in 0..pairs {
                push(&mut out, EntityKind::Landmark, ph.agent_radius, false, 0);
            }
        }
        TaskConfig::CoopNav { agents } => {
            if agents == 0 {
                return Err(Error::Config("coop_nav needs at least one agent".to_string()));
            }
            for _ in 0..agents {
                push(&mut out, EntityKind::GenericAgent, ph.agent_radius, true, 0);
            }
            for _ in 0..agents {
                push(&mut out, EntityKind::Landmark, ph.agent_radius, false, 0);
            }
        }
    }
    Ok(out)
}
