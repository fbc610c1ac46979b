//! How critic input widths scale with the number of agents. The attention
//! critic embeds every agent separately, so its per-agent input is fixed;
//! the concatenating critic consumes the whole joint state, so its input
//! grows with the crowd.

use maac::critics::{AttentionCritic, ConcatCritic};
use maac::envsim::{EnvConfig, Environment, TaskConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> maac::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    println!(
        "{:<7} {:>10} {:>12} {:>16} {:>14}",
        "agents", "sum(obs)", "attn width", "attn head input", "concat width"
    );

    let mut attn_widths = Vec::new();
    let mut concat_widths = Vec::new();
    for count in [4usize, 8, 12] {
        let env = Environment::new(EnvConfig::new(TaskConfig::RoverTower {
            pairs: count / 2,
        }))?;
        let obs = env.obs_sizes();
        let act = env.action_sizes();
        let attention = AttentionCritic::new(&obs, &act, 32, 2, false, &mut rng)?;
        let concat = ConcatCritic::new(&obs, &act, 32, false, &mut rng)?;

        let attn_width = (0..count).map(|i| attention.encoder_input_dim(i)).max().unwrap();
        let concat_width = (0..count).map(|i| concat.input_dim(i)).max().unwrap();
        println!(
            "{:<7} {:>10} {:>12} {:>16} {:>14}",
            count,
            obs.iter().sum::<usize>(),
            attn_width,
            attention.head_net_input_dim(),
            concat_width
        );
        attn_widths.push(attn_width);
        concat_widths.push(concat_width);
    }

    assert!(attn_widths.windows(2).all(|w| w[0] == w[1]));
    let growth: Vec<usize> = concat_widths.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(growth[0] > 0 && growth[0] == growth[1]);
    println!("\nattention per-agent width is constant; concat width grows by");
    println!("{} inputs per extra pair of agents.", growth[0]);
    Ok(())
}
