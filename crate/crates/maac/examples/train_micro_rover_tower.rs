//! End-to-end training on a two-pair Rover-Tower world. Rovers are blind:
//! they see only their own velocity and the last message from their tower,
//! so reward can only improve once the towers learn to talk and the rovers
//! learn to listen. Build with --release; debug builds are painfully slow.

use maac::envsim::{EnvConfig, TaskConfig};
use maac::learner::{rollout_episode, Algorithm, TrainConfig, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> maac::Result<()> {
    let mut env_cfg = EnvConfig::new(TaskConfig::RoverTower { pairs: 2 });
    env_cfg.episode_length = 25;
    // Tuned for this world: the messaging protocol between towers and
    // rovers only takes off when both sides move fast together, so high
    // lr, matched tau, and a small near-on-policy buffer.
    let train_cfg = TrainConfig {
        gamma: 0.9,
        tau: 0.01,
        lr: 0.01,
        batch_size: 256,
        buffer_capacity: 5_000,
        num_envs: 10,
        episode_length: 25,
        steps_per_update: 50,
        critic_updates: 8,
        policy_updates: 8,
        heads: 2,
        hidden: 32,
        algorithm: Algorithm::Maac,
        seed: 1,
        ..TrainConfig::default()
    };
    let episodes = 2_000;

    let mut trainer = Trainer::new(env_cfg.clone(), train_cfg, true)?;
    println!("training maac on 2-pair rover-tower for {episodes} episodes...");
    let mut window = Vec::new();
    let mut first_mean = None;
    trainer.run(episodes, &mut |report| {
        window.push(report.team_return);
        if window.len() == 200 {
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            if first_mean.is_none() {
                first_mean = Some(mean);
            }
            println!("episodes {:>4}: mean team return {mean:>9.2}", report.episode + 1);
            window.clear();
        }
    })?;

    // Greedy-ish evaluation with fresh seeds the trainer never saw.
    let mut env = maac::envsim::Environment::new(env_cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(999);
    let mut returns = Vec::new();
    for ep in 0..20 {
        let (r, _) = rollout_episode(
            trainer.learner().policies(),
            &mut env,
            1_000_000 + ep,
            &mut rng,
            false,
        )?;
        returns.push(r.iter().sum::<f64>() / r.len() as f64);
    }
    let eval_mean = returns.iter().sum::<f64>() / returns.len() as f64;
    println!("\nheld-out eval over 20 episodes: {eval_mean:.2}");
    if let Some(first) = first_mean {
        println!("cost reduction vs the first 200 episodes: {:.0}%", 100.0 * (1.0 - eval_mean / first));
    }

    // Where does the trained critic look? Check each rover's attention.
    let obs = env.reset(7);
    let pairings = env.state().pairings.clone();
    for rover in 0..2 {
        let mut actions = vec![Some(0); 4];
        actions[rover] = None;
        let (_, trace) = trainer.learner().critic().q_values(rover, &obs, &actions)?;
        let trace = trace.expect("attention critic");
        let others: Vec<usize> = (0..4).filter(|&j| j != rover).collect();
        println!("\nrover {rover} (paired tower {}):", pairings[rover]);
        for h in 0..trace.num_heads() {
            let alpha = trace.weights[rover][h].row(0);
            let text: Vec<String> = others
                .iter()
                .zip(alpha)
                .map(|(j, a)| format!("agent {j}: {a:.3}"))
                .collect();
            println!("  head {h}: {}", text.join("  "));
        }
    }
    Ok(())
}
