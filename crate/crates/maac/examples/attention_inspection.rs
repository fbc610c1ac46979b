//! Reads attention weights out of a critic as it evaluates Rover-Tower
//! states. Fresh networks attend near-uniformly; training sharpens the
//! rows (see train_micro_rover_tower).

use maac::envsim::{EnvConfig, Environment, TaskConfig};
use maac::learner::{Learner, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> maac::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let env_cfg = EnvConfig::new(TaskConfig::RoverTower { pairs: 2 });
    let mut env = Environment::new(env_cfg)?;
    let cfg = TrainConfig { hidden: 32, heads: 2, ..TrainConfig::default() };
    let learner = Learner::new(&env.obs_sizes(), &env.action_sizes(), &cfg, &mut rng)?;

    let obs = env.reset(4);
    let n = env.num_agents();
    let pairings = env.state().pairings.clone();
    println!("agents 0..{} are rovers, {}..{} towers", n / 2, n / 2, n);
    println!("pairing: rover r listens to tower {:?}\n", pairings);

    for agent in 0..n {
        // Own action stays unknown; the critic marginalizes over it anyway.
        let mut actions: Vec<Option<usize>> = vec![Some(0); n];
        actions[agent] = None;
        let (_, trace) = learner.critic().q_values(agent, &obs, &actions)?;
        let trace = trace.expect("attention critic");
        let others: Vec<usize> = (0..n).filter(|&j| j != agent).collect();
        println!("agent {agent} attends over {:?}", others);
        for h in 0..trace.num_heads() {
            let alpha = trace.weights[agent][h].row(0);
            let text: Vec<String> = alpha.iter().map(|a| format!("{a:.4}")).collect();
            println!(
                "  head {h}: [{}]  sum {:.12}  entropy {:.4}",
                text.join(" "),
                alpha.iter().sum::<f64>(),
                trace.row_entropy(agent, h, 0)
            );
        }
    }

    let ceiling = ((n - 1) as f64).ln();
    println!("\nentropy ceiling ln(N-1) = {ceiling:.4}; fresh critics sit near it");
    println!("because nothing distinguishes the other agents yet.");
    Ok(())
}
