//! Samples from a discrete policy two ways: the exact categorical draw the
//! rollouts use, and the Gumbel-Softmax relaxation that lets gradients flow
//! through sampled actions.

use maac::agents::{gumbel_softmax, PolicyNet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> maac::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let policy = PolicyNet::new(4, 16, 5, &mut rng);
    let obs = [0.3, -0.7, 0.1, 0.9];

    let probs = policy.action_distribution(&obs)?;
    println!("policy distribution: {probs:.4?}");

    let draws = 200_000;
    let mut counts = vec![0usize; probs.len()];
    for _ in 0..draws {
        counts[policy.sample(&obs, &mut rng)?.action] += 1;
    }
    println!("\n{:<8} {:>10} {:>10}", "action", "exact", "sampled");
    for (a, (&p, &c)) in probs.iter().zip(&counts).enumerate() {
        println!("{:<8} {:>10.5} {:>10.5}", a, p, c as f64 / draws as f64);
    }

    // The hard action of a Gumbel-Softmax draw follows the same categorical
    // distribution at any temperature; the relaxed vector sharpens as the
    // temperature drops.
    let (logits_row, _) = policy.logits(&maac::numcore::DenseMatrix::from_vec(
        1,
        obs.len(),
        obs.to_vec(),
    )?)?;
    let logits = logits_row.row(0).to_vec();
    let mut gumbel_counts = vec![0usize; probs.len()];
    for _ in 0..draws {
        let s = gumbel_softmax(&logits, 1.0, &mut rng, true)?;
        gumbel_counts[s.action] += 1;
    }
    println!("\ngumbel-max action frequencies vs the same exact distribution:");
    for (a, (&p, &c)) in probs.iter().zip(&gumbel_counts).enumerate() {
        println!("{:<8} {:>10.5} {:>10.5}", a, p, c as f64 / draws as f64);
    }

    println!("\none relaxed sample per temperature (same noise seed):");
    for t in [5.0, 1.0, 0.25] {
        let mut fresh = ChaCha8Rng::seed_from_u64(11);
        let s = gumbel_softmax(&logits, t, &mut fresh, true)?;
        let text: Vec<String> = s.relaxed.iter().map(|v| format!("{v:.3}")).collect();
        println!("  T={t:<5} hard action {} relaxed [{}]", s.action, text.join(" "));
    }
    println!("\nstraight-through output is exactly one-hot; the relaxed vector");
    println!("carries the gradient.");
    Ok(())
}
