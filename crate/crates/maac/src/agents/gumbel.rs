//! Gumbel-Softmax relaxation for differentiable samples from discrete
//! policies, with optional straight-through output.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{softmax, softmax_backward_row};

/// One relaxed draw. `output` is what flows forward (hard one-hot under
/// straight-through, otherwise equal to `relaxed`); `relaxed` is the
/// softmax sample the backward pass differentiates through.
#[derive(Clone, Debug)]
pub struct GumbelSample {
    pub output: Vec<f64>,
    pub relaxed: Vec<f64>,
    pub action: usize,
}

/// Draws standard Gumbel noise, one entry per logit.
pub fn sample_gumbel(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            -(-u.ln()).ln()
        })
        .collect()
}

/// softmax((logits + noise) / temperature), the differentiable part.
pub fn relaxed_from_noise(logits: &[f64], noise: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if temperature <= 0.0 {
        return Err(Error::Config(format!(
            "gumbel-softmax temperature must be positive, got {temperature}"
        )));
    }
    if logits.len() != noise.len() {
        return Err(Error::Dimension(format!(
            "{} logits but {} noise entries",
            logits.len(),
            noise.len()
        )));
    }
    let scaled: Vec<f64> = logits
        .iter()
        .zip(noise)
        .map(|(&z, &g)| (z + g) / temperature)
        .collect();
    softmax(&scaled)
}

pub fn gumbel_softmax(
    logits: &[f64],
    temperature: f64,
    rng: &mut impl Rng,
    straight_through: bool,
) -> Result<GumbelSample> {
    let noise = sample_gumbel(logits.len(), rng);
    let relaxed = relaxed_from_noise(logits, &noise, temperature)?;
    let action = argmax(&relaxed);
    let output = if straight_through {
        let mut hard = vec![0.0; relaxed.len()];
        hard[action] = 1.0;
        hard
    } else {
        relaxed.clone()
    };
    Ok(GumbelSample { output, relaxed, action })
}

/// dL/dlogits given dL/doutput, differentiating the relaxed sample (the
/// straight-through estimator routes the hard output's gradient here).
pub fn gumbel_softmax_backward(relaxed: &[f64], dy: &[f64], temperature: f64) -> Vec<f64> {
    let mut ds = vec![0.0; relaxed.len()];
    softmax_backward_row(relaxed, dy, &mut ds);
    for v in &mut ds {
        *v /= temperature;
    }
    ds
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relaxed_sample_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let logits = [0.4, -1.0, 2.0, 0.0];
        for _ in 0..100 {
            let s = gumbel_softmax(&logits, 1.0, &mut rng, false).unwrap();
            assert!((s.output.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn straight_through_output_is_exact_one_hot() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let logits = [0.4, -1.0, 2.0, 0.0];
        for _ in 0..100 {
            let s = gumbel_softmax(&logits, 1.0, &mut rng, true).unwrap();
            assert_eq!(s.output.iter().sum::<f64>(), 1.0);
            assert_eq!(s.output[s.action], 1.0);
            assert!(s.output.iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }

    #[test]
    fn low_temperature_approaches_the_hard_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let logits = [0.4, -1.0, 2.0, 0.0];
        let mut checked = 0;
        for _ in 0..300 {
            let noise = sample_gumbel(logits.len(), &mut rng);
            let perturbed: Vec<f64> =
                logits.iter().zip(&noise).map(|(&z, &g)| z + g).collect();
            let mut order = perturbed.clone();
            order.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if order[0] - order[1] < 0.2 {
                // Near-ties keep visible mass on the runner-up at any
                // temperature; only clear draws are in the hard limit.
                continue;
            }
            let best = perturbed
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            let relaxed = relaxed_from_noise(&logits, &noise, 0.01).unwrap();
            for (k, &v) in relaxed.iter().enumerate() {
                let hard = if k == best { 1.0 } else { 0.0 };
                assert!((v - hard).abs() < 1e-6, "entry {k}: {v}");
            }
            checked += 1;
        }
        assert!(checked > 100, "only {checked} unambiguous draws");
    }

    #[test]
    fn argmax_frequencies_match_softmax_of_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let logits = [0.5, -0.5, 1.0, 0.0, -1.5];
        let probs = softmax(&logits).unwrap();
        let n = 100_000usize;
        let mut counts = vec![0usize; logits.len()];
        for _ in 0..n {
            let s = gumbel_softmax(&logits, 1.0, &mut rng, true).unwrap();
            counts[s.action] += 1;
        }
        for (k, &pk) in probs.iter().enumerate() {
            let expected = n as f64 * pk;
            let sigma = (n as f64 * pk * (1.0 - pk)).sqrt();
            let diff = (counts[k] as f64 - expected).abs();
            assert!(diff <= 3.0 * sigma, "action {k}: |{diff}| > 3 sigma {sigma}");
        }
    }

    #[test]
    fn relaxed_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let logits = vec![0.3, -0.7, 1.2, 0.1];
        let noise = sample_gumbel(logits.len(), &mut rng);
        let coef = [0.9, -0.4, 0.2, 1.1];
        let temp = 0.7;

        let f = |z: &[f64]| -> f64 {
            let y = relaxed_from_noise(z, &noise, temp).unwrap();
            y.iter().zip(&coef).map(|(a, b)| a * b).sum()
        };
        let relaxed = relaxed_from_noise(&logits, &noise, temp).unwrap();
        let analytic = gumbel_softmax_backward(&relaxed, &coef, temp);

        let eps = 1e-6;
        for k in 0..logits.len() {
            let mut plus = logits.clone();
            plus[k] += eps;
            let mut minus = logits.clone();
            minus[k] -= eps;
            let numeric = (f(&plus) - f(&minus)) / (2.0 * eps);
            assert!(
                (analytic[k] - numeric).abs() < 1e-5,
                "logit {k}: analytic {} vs numeric {numeric}",
                analytic[k]
            );
        }
    }

    #[test]
    fn zero_temperature_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(gumbel_softmax(&[0.0, 1.0], 0.0, &mut rng, false).is_err());
    }
}
