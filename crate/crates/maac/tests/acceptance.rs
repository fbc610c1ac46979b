//! Acceptance gate. Nine checks: analytic gradients against central
//! differences, attention normalization, the expected-value baseline,
//! an independent re-derivation of the critic arithmetic, physics against
//! a scalar reference, bytewise determinism, desk-scale learning on the
//! micro Rover-Tower task, attention focus on the paired tower, and the
//! critic width scaling shape. Every test prints one PASS line with the
//! measured quantity and its tolerance (visible under --nocapture).

use std::collections::HashMap;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use maac::cli::MetricsRecord;
use maac::critics::{AttentionCritic, ConcatCritic};
use maac::envsim::{
    physics_step, EntityKind, EntitySpec, EnvConfig, Environment, PhysicsConfig, TaskConfig,
};
use maac::learner::{
    rollout_episode, Algorithm, EpisodeReport, Learner, ReplayBuffer, TrainConfig, Trainer,
    Transition,
};
use maac::numcore::{grad_check, softmax, DenseMatrix, LEAKY_SLOPE};

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

fn random_obs(rng: &mut ChaCha8Rng, dims: &[usize]) -> Vec<Vec<f64>> {
    dims.iter().map(|&d| (0..d).map(|_| uniform(rng, -1.0, 1.0)).collect()).collect()
}

fn random_actions(rng: &mut ChaCha8Rng, dims: &[usize]) -> Vec<usize> {
    dims.iter().map(|&k| rng.gen_range(0..k)).collect()
}

fn obs_matrices(batch: &[Vec<Vec<f64>>]) -> Vec<DenseMatrix> {
    let n = batch[0].len();
    (0..n)
        .map(|i| {
            let rows: Vec<Vec<f64>> = batch.iter().map(|joint| joint[i].clone()).collect();
            DenseMatrix::from_rows(&rows).unwrap()
        })
        .collect()
}

// ---------------------------------------------------------------------
// 1. Analytic gradients of the joint critic regression and the frozen
//    policy surrogate match central finite differences.
// ---------------------------------------------------------------------

#[test]
fn criterion_1_gradient_oracle() {
    let t0 = Instant::now();
    let obs_dims = [4usize, 3, 5];
    let act_dims = [2usize, 3, 2];
    let n = obs_dims.len();
    let b = 4usize;
    let cfg = TrainConfig {
        hidden: 8,
        heads: 2,
        batch_size: b,
        algorithm: Algorithm::Maac,
        seed: 11,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(93);
    let mut learner = Learner::new(&obs_dims, &act_dims, &cfg, &mut rng).unwrap();

    let joints: Vec<Vec<Vec<f64>>> = (0..b).map(|_| random_obs(&mut rng, &obs_dims)).collect();
    let next_joints: Vec<Vec<Vec<f64>>> =
        (0..b).map(|_| random_obs(&mut rng, &obs_dims)).collect();
    let obs = obs_matrices(&joints);
    let next_obs = obs_matrices(&next_joints);
    let actions: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..b).map(|_| rng.gen_range(0..act_dims[i])).collect())
        .collect();

    // Bootstrap targets, frozen before any differentiation: next actions
    // and log probabilities from the target policies, values from the
    // target critic.
    let mut next_actions: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut next_logp = vec![vec![0.0; b]; n];
    for i in 0..n {
        for r in 0..b {
            let s = learner.target_policies()[i].sample(&next_joints[r][i], &mut rng).unwrap();
            next_actions[i].push(s.action);
            next_logp[i][r] = s.log_prob;
        }
    }
    let (target_q, _) = learner.target_critic().forward(&next_obs, &next_actions).unwrap();
    let gamma = learner.config().gamma;
    let alpha = learner.config().temperature;

    // Rewards chosen so the residuals start small; a near-zero quadratic
    // loss keeps central differences of it well above rounding noise.
    let (q_init, _) = learner.critic().forward(&obs, &actions).unwrap();
    let mut bootstrap = vec![vec![0.0; b]; n];
    let mut rewards = vec![vec![0.0; b]; n];
    for i in 0..n {
        for r in 0..b {
            bootstrap[i][r] =
                target_q[i].at(r, next_actions[i][r]) - alpha * next_logp[i][r];
            rewards[i][r] = q_init[i].at(r, actions[i][r]) - gamma * bootstrap[i][r]
                + uniform(&mut rng, -0.02, 0.02);
        }
    }
    let mut y = vec![vec![0.0; b]; n];
    for i in 0..n {
        for r in 0..b {
            y[i][r] = rewards[i][r] + gamma * bootstrap[i][r];
        }
    }

    // Analytic gradient of the summed regression loss.
    let inv_b = 1.0 / b as f64;
    let (q, cache) = learner.critic().forward(&obs, &actions).unwrap();
    let mut dq = Vec::with_capacity(n);
    for i in 0..n {
        let mut d = DenseMatrix::zeros(b, act_dims[i]);
        for r in 0..b {
            let diff = q[i].at(r, actions[i][r]) - y[i][r];
            *d.at_mut(r, actions[i][r]) = 2.0 * diff * inv_b;
        }
        dq.push(d);
    }
    learner.critic_mut().zero_grad();
    learner.critic_mut().backward(&cache, &dq).unwrap();

    let y_frozen = y.clone();
    let actions_frozen = actions.clone();
    let critic_report = grad_check(
        learner.critic_mut(),
        |c| c.params_mut(),
        |c| {
            let (q, _) = c.forward(&obs, &actions_frozen)?;
            let mut loss = 0.0;
            for i in 0..q.len() {
                for r in 0..b {
                    let diff = q[i].at(r, actions_frozen[i][r]) - y_frozen[i][r];
                    loss += diff * diff * inv_b;
                }
            }
            Ok(loss)
        },
        1e-5,
    )
    .unwrap();

    // Policy surrogate: sample a fresh joint action, freeze the per-sample
    // signal (advantage plus entropy bonus), then check the log-prob
    // weighting against finite differences.
    let mut joint_sample: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut sample_logp = vec![vec![0.0; b]; n];
    for i in 0..n {
        let mut acts = Vec::with_capacity(b);
        for r in 0..b {
            let s = learner.policies()[i].sample(&joints[r][i], &mut rng).unwrap();
            sample_logp[i][r] = s.log_prob;
            acts.push(s.action);
        }
        joint_sample.push(acts);
    }
    let (qtables, _) = learner.critic().forward(&obs, &joint_sample).unwrap();
    let mut policy_worst = 0.0f64;
    for i in 0..n {
        let sampled = joint_sample[i].clone();
        let mut signal = Vec::with_capacity(b);
        for r in 0..b {
            let probs = learner.policies()[i].action_distribution(&joints[r][i]).unwrap();
            let qrow = qtables[i].row(r);
            let baseline: f64 = probs.iter().zip(qrow).map(|(p, q)| p * q).sum();
            let advantage = qrow[sampled[r]] - baseline;
            signal.push(advantage - alpha * sample_logp[i][r]);
        }
        let x = DenseMatrix::from_rows(
            &joints.iter().map(|j| j[i].clone()).collect::<Vec<_>>(),
        )
        .unwrap();
        let (logits, cache) = learner.policies()[i].logits(&x).unwrap();
        let mut dlogits = DenseMatrix::zeros(b, act_dims[i]);
        for r in 0..b {
            let p = softmax(logits.row(r)).unwrap();
            for c in 0..act_dims[i] {
                let indicator = if c == sampled[r] { 1.0 } else { 0.0 };
                *dlogits.at_mut(r, c) = -signal[r] * (indicator - p[c]) * inv_b;
            }
        }
        let pol = &mut learner.policies_mut()[i];
        pol.zero_grad();
        pol.backward_logits(&cache, &dlogits).unwrap();
        let report = grad_check(
            pol,
            |p| p.params_mut(),
            |p| {
                let (logits, _) = p.logits(&x)?;
                let mut loss = 0.0;
                for r in 0..b {
                    let probs = softmax(logits.row(r))?;
                    loss -= signal[r] * probs[sampled[r]].ln() * inv_b;
                }
                Ok(loss)
            },
            1e-5,
        )
        .unwrap();
        policy_worst = policy_worst.max(report.max_rel_error);
    }

    let secs = t0.elapsed().as_secs_f64();
    assert!(
        critic_report.max_rel_error < 1e-4,
        "critic gradient mismatch: rel error {} at {:?} (analytic {}, numeric {})",
        critic_report.max_rel_error,
        critic_report.worst,
        critic_report.worst_pair.0,
        critic_report.worst_pair.1
    );
    assert!(policy_worst < 1e-4, "policy gradient mismatch: rel error {policy_worst}");
    assert!(secs < 60.0, "gradient oracle took {secs:.1} s, budget 60 s");
    println!(
        "criterion 1 PASS  critic rel err {:.2e} over {} elements, policy rel err {:.2e} (tol 1e-4, {:.1} s)",
        critic_report.max_rel_error, critic_report.checked, policy_worst, secs
    );
}

// ---------------------------------------------------------------------
// 2. Attention weights are a distribution over the other agents.
// ---------------------------------------------------------------------

#[test]
fn criterion_2_attention_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let mut worst_sum = 0.0f64;
    let mut worst_entropy_excess = f64::NEG_INFINITY;
    let mut pair_cases = 0usize;
    for it in 0..1000 {
        let n = if it % 5 == 0 { 2 } else { rng.gen_range(2..=6) };
        let heads = rng.gen_range(1..=3);
        let embed = heads * rng.gen_range(2..=4);
        let obs_dims: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=5)).collect();
        let act_dims: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=4)).collect();
        let critic =
            AttentionCritic::new(&obs_dims, &act_dims, embed, heads, false, &mut rng).unwrap();
        let batch = rng.gen_range(1..=3);
        let joints: Vec<Vec<Vec<f64>>> =
            (0..batch).map(|_| random_obs(&mut rng, &obs_dims)).collect();
        let obs = obs_matrices(&joints);
        let actions: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..batch).map(|_| rng.gen_range(0..act_dims[i])).collect())
            .collect();
        let (_, cache) = critic.forward(&obs, &actions).unwrap();
        let trace = critic.trace(&cache);
        let cap = ((n - 1) as f64).ln();
        for i in 0..n {
            for h in 0..heads {
                let w = &trace.weights[i][h];
                for r in 0..batch {
                    let row = w.row(r);
                    let sum: f64 = row.iter().sum();
                    worst_sum = worst_sum.max((sum - 1.0).abs());
                    assert!(
                        (sum - 1.0).abs() <= 1e-9,
                        "agent {i} head {h} row {r}: weights sum to {sum}"
                    );
                    let ent = trace.row_entropy(i, h, r);
                    worst_entropy_excess = worst_entropy_excess.max(ent - cap);
                    assert!(
                        ent <= cap + 1e-9,
                        "agent {i} head {h} row {r}: entropy {ent} above ln({}) = {cap}",
                        n - 1
                    );
                    if n == 2 {
                        assert_eq!(row.len(), 1);
                        assert_eq!(row[0], 1.0, "two agents must attend with weight exactly 1");
                        pair_cases += 1;
                    }
                }
            }
        }
    }
    assert!(pair_cases > 0);
    println!(
        "criterion 2 PASS  1000 parameterizations: worst |sum-1| {:.2e} (tol 1e-9), worst entropy excess {:.2e}, {} two-agent rows exactly [1]",
        worst_sum, worst_entropy_excess, pair_cases
    );
}

// ---------------------------------------------------------------------
// 3. The one-pass expected-value baseline equals the explicit loop and
//    the expected advantage vanishes.
// ---------------------------------------------------------------------

#[test]
fn criterion_3_baseline_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    let algorithms = [Algorithm::Maac, Algorithm::MaacUniform, Algorithm::MaddpgSac, Algorithm::Ddpg];
    let mut worst_gap = 0.0f64;
    let mut worst_expected_adv = 0.0f64;
    let mut instances = 0usize;
    for outer in 0..100 {
        let n = rng.gen_range(2..=4);
        let obs_dims: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=5)).collect();
        let act_dims: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=4)).collect();
        let cfg = TrainConfig {
            hidden: 8,
            heads: 2,
            algorithm: algorithms[outer % algorithms.len()],
            seed: outer as u64,
            ..TrainConfig::default()
        };
        let learner = Learner::new(&obs_dims, &act_dims, &cfg, &mut rng).unwrap();
        for _ in 0..10 {
            let obs = random_obs(&mut rng, &obs_dims);
            let agent = rng.gen_range(0..n);
            let others = random_actions(&mut rng, &act_dims);
            let mut slots: Vec<Option<usize>> = others.iter().map(|&a| Some(a)).collect();
            slots[agent] = None;
            let baseline = learner.baseline(agent, &obs, &slots).unwrap();
            let probs = learner.policies()[agent].action_distribution(&obs[agent]).unwrap();

            // Explicit loop: one critic query per candidate own action.
            let mut explicit = 0.0;
            let mut qs = Vec::with_capacity(act_dims[agent]);
            for k in 0..act_dims[agent] {
                let mut with_k = slots.clone();
                with_k[agent] = Some(k);
                let (q, _) = learner.critic().q_values(agent, &obs, &with_k).unwrap();
                explicit += probs[k] * q[k];
                qs.push(q[k]);
            }
            let gap = (baseline - explicit).abs();
            worst_gap = worst_gap.max(gap);
            assert!(gap <= 1e-10, "baseline {baseline} vs explicit loop {explicit}");

            let expected_adv: f64 =
                probs.iter().zip(&qs).map(|(p, q)| p * (q - baseline)).sum();
            worst_expected_adv = worst_expected_adv.max(expected_adv.abs());
            assert!(
                expected_adv.abs() <= 1e-10,
                "expected advantage {expected_adv} should vanish"
            );
            instances += 1;
        }
    }
    assert_eq!(instances, 1000);
    println!(
        "criterion 3 PASS  1000 instances: worst |baseline - loop| {:.2e}, worst |E[advantage]| {:.2e} (tol 1e-10)",
        worst_gap, worst_expected_adv
    );
}

// ---------------------------------------------------------------------
// 4. The critic forward pass agrees with a straight-line re-derivation
//    written against the named parameter tensors.
// ---------------------------------------------------------------------

fn affine_vec(x: &[f64], w: &DenseMatrix, b: &DenseMatrix) -> Vec<f64> {
    let out = w.cols();
    let mut y = vec![0.0; out];
    for c in 0..out {
        let mut acc = b.at(0, c);
        for (r, &xr) in x.iter().enumerate() {
            acc += xr * w.at(r, c);
        }
        y[c] = acc;
    }
    y
}

fn leaky_vec(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v >= 0.0 { v } else { LEAKY_SLOPE * v }).collect()
}

fn matvec(x: &[f64], w: &DenseMatrix) -> Vec<f64> {
    let out = w.cols();
    let mut y = vec![0.0; out];
    for c in 0..out {
        let mut acc = 0.0;
        for (r, &xr) in x.iter().enumerate() {
            acc += xr * w.at(r, c);
        }
        y[c] = acc;
    }
    y
}

fn reference_q(
    critic: &AttentionCritic,
    agent: usize,
    obs: &[Vec<f64>],
    actions: &[usize],
) -> Vec<f64> {
    let params: HashMap<String, &DenseMatrix> =
        critic.named_params().into_iter().map(|(name, p)| (name, &p.value)).collect();
    let n = critic.num_agents();
    let nh = critic.num_heads();
    let d = critic.embed_dim();
    let dk = d / nh;
    let act_dims = critic.action_dims();

    let e_obs = {
        let w = params[&format!("obs_encoder.{agent}.w")];
        let b = params[&format!("obs_encoder.{agent}.b")];
        leaky_vec(&affine_vec(&obs[agent], w, b))
    };
    let others: Vec<usize> = (0..n).filter(|&j| j != agent).collect();
    let mut e_sa: HashMap<usize, Vec<f64>> = HashMap::new();
    for &j in &others {
        let mut input = obs[j].clone();
        let mut onehot = vec![0.0; act_dims[j]];
        onehot[actions[j]] = 1.0;
        input.extend_from_slice(&onehot);
        let w = params[&format!("sa_encoder.{j}.w")];
        let b = params[&format!("sa_encoder.{j}.b")];
        e_sa.insert(j, leaky_vec(&affine_vec(&input, w, b)));
    }

    let mut z = e_obs.clone();
    for h in 0..nh {
        let alpha: Vec<f64> = if critic.is_uniform() {
            vec![1.0 / others.len() as f64; others.len()]
        } else {
            let w_q = params[&format!("head.{h}.w_q")];
            let w_k = params[&format!("head.{h}.w_k")];
            let query = matvec(&e_obs, w_q);
            let scores: Vec<f64> = others
                .iter()
                .map(|j| {
                    let key = matvec(&e_sa[j], w_k);
                    query.iter().zip(&key).map(|(a, b)| a * b).sum::<f64>()
                        / (dk as f64).sqrt()
                })
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.iter().map(|&e| e / sum).collect()
        };
        let v = params[&format!("head.{h}.v")];
        let mut context = vec![0.0; dk];
        for (jj, &j) in others.iter().enumerate() {
            let val = leaky_vec(&matvec(&e_sa[&j], v));
            for c in 0..dk {
                context[c] += alpha[jj] * val[c];
            }
        }
        z.extend_from_slice(&context);
    }

    let w1 = params[&format!("f.{agent}.w1")];
    let b1 = params[&format!("f.{agent}.b1")];
    let w2 = params[&format!("f.{agent}.w2")];
    let b2 = params[&format!("f.{agent}.b2")];
    let hidden = leaky_vec(&affine_vec(&z, w1, b1));
    affine_vec(&hidden, w2, b2)
}

#[test]
fn criterion_4_independent_critic_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let mut worst = 0.0f64;
    for it in 0..100 {
        let heads = rng.gen_range(1..=3);
        let embed = heads * rng.gen_range(2..=4);
        let obs_dims: Vec<usize> = (0..3).map(|_| rng.gen_range(2..=5)).collect();
        let act_dims: Vec<usize> = (0..3).map(|_| rng.gen_range(2..=4)).collect();
        let uniform_mode = it % 4 == 3;
        let critic = AttentionCritic::new(
            &obs_dims,
            &act_dims,
            embed,
            heads,
            uniform_mode,
            &mut rng,
        )
        .unwrap();
        let obs = random_obs(&mut rng, &obs_dims);
        let actions = random_actions(&mut rng, &act_dims);
        for agent in 0..3 {
            let slots: Vec<Option<usize>> = actions.iter().map(|&a| Some(a)).collect();
            let (q, _) = critic.q_values(agent, &obs, &slots).unwrap();
            let reference = reference_q(&critic, agent, &obs, &actions);
            assert_eq!(q.len(), reference.len());
            for (k, (a, b)) in q.iter().zip(&reference).enumerate() {
                let gap = (a - b).abs();
                worst = worst.max(gap);
                assert!(
                    gap <= 1e-10,
                    "instance {it} agent {agent} action {k}: critic {a} vs reference {b}"
                );
            }
        }
    }
    println!(
        "criterion 4 PASS  100 three-agent instances: worst |q - reference| {:.2e} (tol 1e-10)",
        worst
    );
}

// ---------------------------------------------------------------------
// 5. The particle integrator matches a scalar transcription and never
//    exceeds the speed cap.
// ---------------------------------------------------------------------

fn softplus_ref(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[allow(clippy::needless_range_loop)]
fn reference_step(
    cfg: &PhysicsConfig,
    specs: &[EntitySpec],
    positions: &[[f64; 2]],
    velocities: &[[f64; 2]],
    applied: &[[f64; 2]],
) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let n = specs.len();
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
            if dist > dist_min + 40.0 * cfg.contact_margin {
                continue;
            }
            let (ux, uy) = if dist > 1e-9 { (dx / dist, dy / dist) } else { (1.0, 0.0) };
            let pen = softplus_ref((dist_min - dist) / cfg.contact_margin) * cfg.contact_margin;
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
    let mut pos = positions.to_vec();
    let mut vel = velocities.to_vec();
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
        for k in 0..2 {
            vel[i][k] = (1.0 - cfg.damping) * vel[i][k] + forces[i][k] / cfg.mass * cfg.dt;
        }
        let speed = (vel[i][0] * vel[i][0] + vel[i][1] * vel[i][1]).sqrt();
        if speed > cfg.max_speed {
            let scale = cfg.max_speed / speed;
            vel[i][0] *= scale;
            vel[i][1] *= scale;
        }
        pos[i][0] += vel[i][0] * cfg.dt;
        pos[i][1] += vel[i][1] * cfg.dt;
    }
    (pos, vel)
}

fn random_spec(rng: &mut ChaCha8Rng, id: usize) -> EntitySpec {
    let kinds = [
        EntityKind::Hunter,
        EntityKind::Rover,
        EntityKind::GenericAgent,
        EntityKind::Tower,
        EntityKind::Landmark,
        EntityKind::Treasure,
    ];
    EntitySpec {
        id,
        kind: kinds[rng.gen_range(0..kinds.len())],
        radius: uniform(rng, 0.02, 0.1),
        movable: rng.gen_bool(0.7),
        color_tag: 0,
    }
}

#[test]
fn criterion_5_physics_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let cfg = PhysicsConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6);
        let specs: Vec<EntitySpec> = (0..n).map(|id| random_spec(&mut rng, id)).collect();
        let mut positions: Vec<[f64; 2]> = (0..n)
            .map(|_| [uniform(&mut rng, -1.3, 1.3), uniform(&mut rng, -1.3, 1.3)])
            .collect();
        // Half the instances force near or exact contact.
        if n >= 2 && rng.gen_bool(0.5) {
            let offset = if rng.gen_bool(0.2) {
                [0.0, 0.0]
            } else {
                [uniform(&mut rng, -0.08, 0.08), uniform(&mut rng, -0.08, 0.08)]
            };
            positions[1] = [positions[0][0] + offset[0], positions[0][1] + offset[1]];
        }
        let velocities: Vec<[f64; 2]> = (0..n)
            .map(|_| [uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0)])
            .collect();
        let applied: Vec<[f64; 2]> = (0..n)
            .map(|_| [uniform(&mut rng, -5.0, 5.0), uniform(&mut rng, -5.0, 5.0)])
            .collect();

        let (ref_pos, ref_vel) = reference_step(&cfg, &specs, &positions, &velocities, &applied);
        let mut pos = positions.clone();
        let mut vel = velocities.clone();
        physics_step(&cfg, &specs, &mut pos, &mut vel, &applied);
        for i in 0..n {
            for k in 0..2 {
                let dp = (pos[i][k] - ref_pos[i][k]).abs();
                let dv = (vel[i][k] - ref_vel[i][k]).abs();
                worst = worst.max(dp).max(dv);
                assert!(dp <= 1e-12, "entity {i} axis {k}: position {} vs {}", pos[i][k], ref_pos[i][k]);
                assert!(dv <= 1e-12, "entity {i} axis {k}: velocity {} vs {}", vel[i][k], ref_vel[i][k]);
            }
        }
    }

    // Speed cap over a long randomly forced run of a colliding crowd.
    let crowd = 8;
    let specs: Vec<EntitySpec> = (0..crowd)
        .map(|id| EntitySpec {
            id,
            kind: EntityKind::Hunter,
            radius: 0.05,
            movable: true,
            color_tag: 0,
        })
        .collect();
    let mut pos: Vec<[f64; 2]> = (0..crowd)
        .map(|_| [uniform(&mut rng, -0.3, 0.3), uniform(&mut rng, -0.3, 0.3)])
        .collect();
    let mut vel = vec![[0.0f64; 2]; crowd];
    let mut checked = 0usize;
    for _ in 0..100_000 {
        let applied: Vec<[f64; 2]> = (0..crowd)
            .map(|_| [uniform(&mut rng, -8.0, 8.0), uniform(&mut rng, -8.0, 8.0)])
            .collect();
        physics_step(&cfg, &specs, &mut pos, &mut vel, &applied);
        for v in &vel {
            let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
            assert!(speed <= cfg.max_speed + 1e-12, "speed {speed} above cap {}", cfg.max_speed);
            assert!(speed.is_finite());
            checked += 1;
        }
    }
    println!(
        "criterion 5 PASS  1000 steps match the scalar reference within {:.2e} (tol 1e-12); speed cap held over {} entity-steps",
        worst, checked
    );
}

// ---------------------------------------------------------------------
// 6. Equal seeds give bytewise-equal metrics; the buffer is strictly FIFO.
// ---------------------------------------------------------------------

fn metrics_lines(seed: u64, episodes: usize) -> Vec<String> {
    let env_cfg = EnvConfig::new(TaskConfig::CoopNav { agents: 3 });
    let cfg = TrainConfig {
        hidden: 16,
        heads: 2,
        batch_size: 32,
        buffer_capacity: 2_000,
        num_envs: 2,
        episode_length: 15,
        steps_per_update: 30,
        critic_updates: 1,
        policy_updates: 1,
        algorithm: Algorithm::Maac,
        seed,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(env_cfg, cfg, true).unwrap();
    let mut lines = Vec::new();
    trainer
        .run(episodes, &mut |report: EpisodeReport| {
            let record = MetricsRecord::from_report(&report, 0.0);
            lines.push(serde_json::to_string(&record).unwrap());
        })
        .unwrap();
    lines
}

#[test]
fn criterion_6_determinism_and_fifo() {
    let a = metrics_lines(77, 6);
    let b = metrics_lines(77, 6);
    assert!(a.len() >= 5, "need at least 5 episodes, got {}", a.len());
    assert_eq!(a, b, "equal seeds must give byte-identical metrics");
    let bytes: usize = a.iter().map(|l| l.len()).sum();

    let mut buffer = ReplayBuffer::new(100, 9).unwrap();
    for k in 0..250 {
        buffer
            .push(Transition {
                observations: vec![vec![k as f64, 1.0]],
                actions: vec![0],
                rewards: vec![k as f64],
                next_observations: vec![vec![k as f64 + 1.0, 1.0]],
            })
            .unwrap();
    }
    assert_eq!(buffer.len(), 100);
    assert_eq!(buffer.capacity(), 100);
    for slot in 0..100 {
        let t = buffer.get(slot).unwrap();
        assert_eq!(t.rewards[0], (150 + slot) as f64, "slot {slot} holds the wrong insertion");
    }
    assert!(buffer.get(100).is_none());
    println!(
        "criterion 6 PASS  {} episodes byte-identical across reruns ({} metric bytes); buffer kept exactly insertions 150..249 after 250 pushes at capacity 100",
        a.len(),
        bytes
    );
}

// ---------------------------------------------------------------------
// 7 and 8. Desk-scale learning and attention focus on micro Rover-Tower.
// Training is shared: six 50k-step runs (three seeds, attention and
// uniform ablation).
// ---------------------------------------------------------------------

struct DeskRun {
    algorithm: Algorithm,
    seed: u64,
    first100: f64,
    final100: f64,
    trainer: Trainer,
}

const DESK_SEEDS: [u64; 3] = [1, 2, 3];
const DESK_EPISODES: usize = 2_000;

// Short episodes, a small near-on-policy buffer, dense update blocks, and
// target networks that track as fast as the policies move. The tower/rover
// messaging protocol only bootstraps when both sides adapt together.
fn desk_config(algorithm: Algorithm, seed: u64) -> TrainConfig {
    TrainConfig {
        gamma: 0.9,
        tau: 0.01,
        temperature: 0.01,
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
        algorithm,
        seed,
    }
}

fn desk_runs() -> &'static (Vec<DeskRun>, f64) {
    static RUNS: OnceLock<(Vec<DeskRun>, f64)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let t0 = Instant::now();
        let mut runs = Vec::new();
        for algorithm in [Algorithm::Maac, Algorithm::MaacUniform] {
            for seed in DESK_SEEDS {
                let env_cfg = EnvConfig::new(TaskConfig::RoverTower { pairs: 2 });
                let cfg = desk_config(algorithm, seed);
                let mut trainer = Trainer::new(env_cfg, cfg, true).unwrap();
                let mut team = Vec::with_capacity(DESK_EPISODES);
                trainer
                    .run(DESK_EPISODES, &mut |r: EpisodeReport| team.push(r.team_return))
                    .unwrap();
                let first100 = team[..100].iter().sum::<f64>() / 100.0;
                let final100 = team[team.len() - 100..].iter().sum::<f64>() / 100.0;
                runs.push(DeskRun { algorithm, seed, first100, final100, trainer });
            }
        }
        (runs, t0.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_7_desk_scale_learning() {
    let (runs, train_secs) = desk_runs();
    let mean = |alg: Algorithm, f: &dyn Fn(&DeskRun) -> f64| -> f64 {
        let vals: Vec<f64> =
            runs.iter().filter(|r| r.algorithm == alg).map(|r| f(r)).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    for r in runs {
        println!(
            "  {} seed {}: first-100 {:.2}, final-100 {:.2}, reduction {:.1}%",
            r.algorithm,
            r.seed,
            r.first100,
            r.final100,
            (1.0 - r.final100 / r.first100) * 100.0
        );
    }
    let maac_first = mean(Algorithm::Maac, &|r| r.first100);
    let maac_final = mean(Algorithm::Maac, &|r| r.final100);
    let uniform_final = mean(Algorithm::MaacUniform, &|r| r.final100);
    let reduction = 1.0 - maac_final / maac_first;
    assert!(maac_first < 0.0 && maac_final < 0.0);
    assert!(
        reduction >= 0.5,
        "cost reduction {:.1}% below 50% (first-100 {maac_first:.2}, final-100 {maac_final:.2})",
        reduction * 100.0
    );
    assert!(
        maac_final >= uniform_final,
        "attention final reward {maac_final:.2} below uniform ablation {uniform_final:.2}"
    );
    assert!(*train_secs <= 1800.0, "training took {train_secs:.0} s, budget 1800 s");
    println!(
        "criterion 7 PASS  cost reduction {:.1}% (>= 50%), final reward {:.2} vs uniform {:.2}, {:.0} s for 6 runs (budget 1800 s)",
        reduction * 100.0, maac_final, uniform_final, train_secs
    );
}

#[test]
fn criterion_8_attention_focusing() {
    let (runs, _) = desk_runs();
    let mut per_seed = Vec::new();
    for run in runs.iter().filter(|r| r.algorithm == Algorithm::Maac) {
        let learner = run.trainer.learner();
        let mut env_cfg = EnvConfig::new(TaskConfig::RoverTower { pairs: 2 });
        env_cfg.episode_length = desk_config(Algorithm::Maac, run.seed).episode_length;
        let mut env = Environment::new(env_cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(run.seed.wrapping_add(8_000));
        let mut focused = 0usize;
        let mut total = 0usize;
        for episode in 0..5 {
            let (_, steps) = rollout_episode(
                learner.policies(),
                &mut env,
                90_000 + run.seed * 100 + episode,
                &mut rng,
                true,
            )
            .unwrap();
            let pairings = env.state().pairings.clone();
            for step in &steps {
                for rover in 0..2 {
                    let mut slots: Vec<Option<usize>> =
                        step.actions.iter().map(|&a| Some(a)).collect();
                    slots[rover] = None;
                    let (_, trace) =
                        learner.critic().q_values(rover, &step.observations, &slots).unwrap();
                    let trace = trace.expect("attention critic must expose a trace");
                    let others: Vec<usize> = (0..4).filter(|&j| j != rover).collect();
                    let head_max = |target: usize| -> f64 {
                        let jj = others.iter().position(|&j| j == target).unwrap();
                        (0..trace.num_heads())
                            .map(|h| trace.weights[rover][h].at(0, jj))
                            .fold(f64::NEG_INFINITY, f64::max)
                    };
                    let paired = pairings[rover];
                    let unpaired: Vec<usize> =
                        (2..4).filter(|&t| t != paired).collect();
                    let paired_weight = head_max(paired);
                    if unpaired.iter().all(|&t| paired_weight > head_max(t)) {
                        focused += 1;
                    }
                    total += 1;
                }
            }
        }
        let fraction = focused as f64 / total as f64;
        println!("  seed {}: paired tower dominates in {:.1}% of {} rover-steps", run.seed, fraction * 100.0, total);
        per_seed.push(fraction);
    }
    let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
    assert!(
        mean >= 0.7,
        "paired tower dominated in {:.1}% of steps, need 70%",
        mean * 100.0
    );
    println!(
        "criterion 8 PASS  paired tower holds the head-max weight in {:.1}% of evaluation steps (>= 70%, mean over {} seeds)",
        mean * 100.0,
        per_seed.len()
    );
}

// ---------------------------------------------------------------------
// 9. Width scaling: attention critic inputs stay fixed per agent while
//    concat critic inputs grow with the whole team.
// ---------------------------------------------------------------------

#[test]
fn criterion_9_scaling_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(901);
    let counts = [4usize, 8, 12];
    let mut attention_widths = Vec::new();
    let mut concat_widths = Vec::new();
    let mut obs_totals = Vec::new();
    for &count in &counts {
        let env = Environment::new(EnvConfig::new(TaskConfig::RoverTower { pairs: count / 2 }))
            .unwrap();
        let obs_dims = env.obs_sizes();
        let act_dims = env.action_sizes();
        assert_eq!(obs_dims.len(), count);
        let attention =
            AttentionCritic::new(&obs_dims, &act_dims, 32, 2, false, &mut rng).unwrap();
        let concat = ConcatCritic::new(&obs_dims, &act_dims, 32, false, &mut rng).unwrap();

        // Per-agent encoder widths: each agent's own observation and action
        // only, independent of the team size.
        let enc: Vec<usize> = (0..count).map(|i| attention.encoder_input_dim(i)).collect();
        for (i, &w) in enc.iter().enumerate() {
            assert_eq!(w, obs_dims[i] + act_dims[i]);
        }
        attention_widths.push((
            enc.iter().copied().max().unwrap(),
            attention.head_net_input_dim(),
        ));

        let mixer: Vec<usize> = (0..count).map(|i| concat.input_dim(i)).collect();
        let obs_total: usize = obs_dims.iter().sum();
        for (i, &w) in mixer.iter().enumerate() {
            let others_actions: usize =
                (0..count).filter(|&j| j != i).map(|j| act_dims[j]).sum();
            assert_eq!(w, obs_total + others_actions);
        }
        concat_widths.push(mixer.iter().copied().max().unwrap());
        obs_totals.push(obs_total);
    }

    assert!(
        attention_widths.windows(2).all(|w| w[0] == w[1]),
        "attention widths must not change with team size: {attention_widths:?}"
    );
    assert!(concat_widths[0] < concat_widths[1] && concat_widths[1] < concat_widths[2]);
    let d1 = concat_widths[1] - concat_widths[0];
    let d2 = concat_widths[2] - concat_widths[1];
    assert_eq!(d1, d2, "concat width increments must be linear in the team size");
    let obs_d1 = obs_totals[1] - obs_totals[0];
    let obs_d2 = obs_totals[2] - obs_totals[1];
    assert_eq!(obs_d1, obs_d2);
    println!(
        "criterion 9 PASS  attention width (encoder, mixer) fixed at {:?} for N in {:?}; concat width {:?} grows by {} per step as total observation size grows by {}",
        attention_widths[0], counts, concat_widths, d1, obs_d1
    );
}
