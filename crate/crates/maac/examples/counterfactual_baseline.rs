//! The multi-agent baseline: marginalize one agent's action out of its
//! critic while everyone else's actions stay fixed. Because the critic
//! emits a value per own action in one pass, the exact expectation is a
//! dot product, and the resulting advantage has expectation zero.

use maac::envsim::{EnvConfig, Environment};
use maac::learner::{Learner, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> maac::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut env = Environment::new(EnvConfig::default_for("coop_nav")?)?;
    let cfg = TrainConfig { hidden: 32, heads: 2, ..TrainConfig::default() };
    let learner = Learner::new(&env.obs_sizes(), &env.action_sizes(), &cfg, &mut rng)?;

    let obs = env.reset(9);
    let n = env.num_agents();
    let actions: Vec<usize> =
        env.action_sizes().iter().map(|&k| rng.gen_range(0..k)).collect();

    println!("joint action {:?}\n", actions);
    for agent in 0..n {
        let mut masked: Vec<Option<usize>> = actions.iter().map(|&a| Some(a)).collect();
        masked[agent] = None;

        let baseline = learner.baseline(agent, &obs, &masked)?;

        // The same number the long way: enumerate own actions.
        let (qvals, _) = learner.critic().q_values(agent, &obs, &masked)?;
        let probs = learner.policies()[agent].action_distribution(&obs[agent])?;
        let explicit: f64 = probs.iter().zip(&qvals).map(|(p, q)| p * q).sum();

        let q_taken = qvals[actions[agent]];
        let advantage = q_taken - baseline;
        let expected_advantage: f64 =
            probs.iter().zip(&qvals).map(|(p, q)| p * (q - baseline)).sum();

        println!("agent {agent}");
        println!("  q per own action   {:.5?}", qvals);
        println!("  policy             {:.5?}", probs);
        println!("  baseline           {baseline:.10}");
        println!("  explicit sum       {explicit:.10}");
        println!("  |difference|       {:.3e}", (baseline - explicit).abs());
        println!("  advantage(a={})    {advantage:+.6}", actions[agent]);
        println!("  E[advantage]       {expected_advantage:+.3e}\n");
        assert!((baseline - explicit).abs() < 1e-12);
        assert!(expected_advantage.abs() < 1e-10);
    }
    println!("baseline equals the explicit marginalization; the advantage is");
    println!("mean-zero under the agent's own policy.");
    Ok(())
}
