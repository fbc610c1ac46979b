//! Force integration for the particle world: damped velocities, speed
//! clamping, soft contact forces between colliding bodies and a soft
//! boundary spring instead of hard clipping.

use serde::{Deserialize, Serialize};

use super::world::EntitySpec;

/// Physical constants of the arena. All distances are in arena units,
/// the arena itself is the square [-arena_half, arena_half]^2.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub dt: f64,
    pub damping: f64,
    pub mass: f64,
    /// Magnitude of the force a movement action applies.
    pub force_gain: f64,
    pub max_speed: f64,
    pub arena_half: f64,
    pub contact_force: f64,
    pub contact_margin: f64,
    /// Spring constant of the inward push beyond the arena edge.
    pub boundary_force: f64,
    pub agent_radius: f64,
    /// Radius of banks and towers.
    pub station_radius: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            dt: 0.1,
            damping: 0.25,
            mass: 1.0,
            force_gain: 5.0,
            max_speed: 1.0,
            arena_half: 1.0,
            contact_force: 100.0,
            contact_margin: 1e-3,
            boundary_force: 10.0,
            agent_radius: 0.05,
            station_radius: 0.08,
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Advances positions and velocities by one tick.
///
/// Contact and boundary forces are added to the applied forces first,
/// then every movable body integrates v' = (1 - damping) v + (F/m) dt
/// (clamped to max_speed) and p' = p + v' dt. Immovable bodies ignore
/// forces entirely.
pub fn physics_step(
    cfg: &PhysicsConfig,
    specs: &[EntitySpec],
    positions: &mut [[f64; 2]],
    velocities: &mut [[f64; 2]],
    applied: &[[f64; 2]],
) {
    let n = specs.len();
    debug_assert_eq!(positions.len(), n);
    debug_assert_eq!(velocities.len(), n);
    debug_assert_eq!(applied.len(), n);

    let mut forces = vec![[0.0f64; 2]; n];
    for i in 0..n {
        if specs[i].movable {
            forces[i] = applied[i];
        }
    }

    for i in 0..n {
        for j in (i + 1)..n {
            if !(specs[i].kind.collides() && specs[j].kind.collides()) {
                continue;
            }
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            let dist = (dx * dx + dy * dy).sqrt();
            let dist_min = specs[i].radius + specs[j].radius;
            // Beyond ~40 margins the softplus tail is < 1e-18 of a unit
            // force; dropping it keeps distant bodies bit-exactly still.
            if dist > dist_min + 40.0 * cfg.contact_margin {
                continue;
            }
            let (ux, uy) = if dist > 1e-9 { (dx / dist, dy / dist) } else { (1.0, 0.0) };
            let pen = softplus((dist_min - dist) / cfg.contact_margin) * cfg.contact_margin;
            let f = cfg.contact_force * pen;
            if specs[i].movable {
                forces[i][0] += f * ux;
                forces[i][1] += f * uy;
            }
            if specs[j].movable {
                forces[j][0] -= f * ux;
                forces[j][1] -= f * uy;
            }
        }
    }

    for i in 0..n {
        if !specs[i].movable {
            continue;
        }
        for k in 0..2 {
            let over = positions[i][k].abs() - cfg.arena_half;
            if over > 0.0 {
                forces[i][k] -= cfg.boundary_force * over * positions[i][k].signum();
            }
        }
    }

    for i in 0..n {
        if !specs[i].movable {
            continue;
        }
        for k in 0..2 {
            velocities[i][k] =
                (1.0 - cfg.damping) * velocities[i][k] + forces[i][k] / cfg.mass * cfg.dt;
        }
        let speed = (velocities[i][0] * velocities[i][0] + velocities[i][1] * velocities[i][1])
            .sqrt();
        if speed > cfg.max_speed {
            let scale = cfg.max_speed / speed;
            velocities[i][0] *= scale;
            velocities[i][1] *= scale;
        }
        positions[i][0] += velocities[i][0] * cfg.dt;
        positions[i][1] += velocities[i][1] * cfg.dt;
    }
}
