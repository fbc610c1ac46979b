//! Checks every hand-written backward pass against central finite
//! differences: the attention critic (both modes), the concatenation
//! critic, and a policy network.

use maac::critics::{AttentionCritic, ConcatCritic};
use maac::numcore::{grad_check, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OBS_DIMS: [usize; 3] = [4, 3, 5];
const ACTION_DIMS: [usize; 3] = [2, 3, 2];
const BATCH: usize = 4;

fn random_inputs(rng: &mut ChaCha8Rng) -> (Vec<DenseMatrix>, Vec<Vec<usize>>) {
    let obs = OBS_DIMS
        .iter()
        .map(|&d| {
            let data: Vec<f64> = (0..BATCH * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            DenseMatrix::from_vec(BATCH, d, data).unwrap()
        })
        .collect();
    let actions = ACTION_DIMS
        .iter()
        .map(|&k| (0..BATCH).map(|_| rng.gen_range(0..k)).collect())
        .collect();
    (obs, actions)
}

/// Random linear functional of the per-action value tables, so the loss
/// exercises every output column.
fn coefficients(rng: &mut ChaCha8Rng) -> Vec<DenseMatrix> {
    ACTION_DIMS
        .iter()
        .map(|&k| {
            let data: Vec<f64> = (0..BATCH * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            DenseMatrix::from_vec(BATCH, k, data).unwrap()
        })
        .collect()
}

fn main() -> maac::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (obs, actions) = random_inputs(&mut rng);
    let coefs = coefficients(&mut rng);

    println!("{:<28} {:>9} {:>13}", "model", "elements", "max rel err");

    for uniform in [false, true] {
        let mut critic =
            AttentionCritic::new(&OBS_DIMS, &ACTION_DIMS, 8, 2, uniform, &mut rng)?;
        let (_, cache) = critic.forward(&obs, &actions)?;
        critic.backward(&cache, &coefs)?;
        let loss = |c: &AttentionCritic| {
            let (q, _) = c.forward(&obs, &actions).unwrap();
            q.iter()
                .zip(&coefs)
                .map(|(qi, ci)| qi.data().iter().zip(ci.data()).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        };
        let report = grad_check(&mut critic, |c| c.params_mut(), |c| Ok(loss(c)), 1e-5)?;
        let name = if uniform { "attention critic (uniform)" } else { "attention critic" };
        println!("{:<28} {:>9} {:>13.3e}", name, report.checked, report.max_rel_error);
        assert!(report.max_rel_error < 1e-4);
    }

    for own_obs_only in [false, true] {
        let mut critic =
            ConcatCritic::new(&OBS_DIMS, &ACTION_DIMS, 8, own_obs_only, &mut rng)?;
        let (_, cache) = critic.forward(&obs, &actions)?;
        critic.backward(&cache, &coefs)?;
        let loss = |c: &ConcatCritic| {
            let (q, _) = c.forward(&obs, &actions).unwrap();
            q.iter()
                .zip(&coefs)
                .map(|(qi, ci)| qi.data().iter().zip(ci.data()).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        };
        let report = grad_check(&mut critic, |c| c.params_mut(), |c| Ok(loss(c)), 1e-5)?;
        let name = if own_obs_only { "concat critic (own obs)" } else { "concat critic (central)" };
        println!("{:<28} {:>9} {:>13.3e}", name, report.checked, report.max_rel_error);
        assert!(report.max_rel_error < 1e-4);
    }

    // Policy: differentiate a weighted sum of logits.
    let mut policy = maac::agents::PolicyNet::new(5, 8, 3, &mut rng);
    let x_data: Vec<f64> = (0..BATCH * 5).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = DenseMatrix::from_vec(BATCH, 5, x_data)?;
    let c_data: Vec<f64> = (0..BATCH * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let c = DenseMatrix::from_vec(BATCH, 3, c_data)?;
    let (_, cache) = policy.logits(&x)?;
    policy.backward_logits(&cache, &c)?;
    let loss = |p: &maac::agents::PolicyNet| {
        let (logits, _) = p.logits(&x).unwrap();
        logits.data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
    };
    let report = grad_check(&mut policy, |p| p.params_mut(), |p| Ok(loss(p)), 1e-5)?;
    println!("{:<28} {:>9} {:>13.3e}", "policy network", report.checked, report.max_rel_error);
    assert!(report.max_rel_error < 1e-4);

    println!("\nall gradients match finite differences within 1e-4");
    Ok(())
}
