//! Steps each of the three particle-world tasks with random actions and
//! prints what the agents see and earn.

use maac::envsim::{EnvConfig, Environment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> maac::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    for task in ["coop_nav", "rover_tower", "ctc"] {
        let mut config = EnvConfig::default_for(task)?;
        config.episode_length = 25;
        let mut env = Environment::new(config)?;
        let n = env.num_agents();
        println!("== {task}: {n} agents");
        println!("   obs sizes {:?}", env.obs_sizes());
        println!("   action sizes {:?}", env.action_sizes());

        let mut obs = env.reset(1);
        let mut returns = vec![0.0; n];
        for step in 0..env.episode_length() {
            let actions: Vec<usize> =
                env.action_sizes().iter().map(|&k| rng.gen_range(0..k)).collect();
            let result = env.step(&actions)?;
            for (acc, r) in returns.iter_mut().zip(&result.rewards) {
                *acc += *r;
            }
            if step < 3 {
                println!("   step {step}: actions {:?} rewards {:?}", actions, result.rewards);
            }
            obs = result.observations;
        }
        let team = returns.iter().sum::<f64>() / n as f64;
        println!("   returns after {} steps: {:?}", env.episode_length(), returns);
        println!("   team mean {team:.3}");
        println!("   agent 0 final obs {:?}\n", &obs[0][..obs[0].len().min(8)]);
    }
    Ok(())
}
