//! The experiment plumbing end to end, in process: a config with
//! overrides, a short training run, a checkpoint round-trip, and an
//! evaluation that provably leaves the parameters alone.

use maac::cli::{load_checkpoint, param_hash, save_checkpoint, ExperimentConfig};
use maac::learner::{derive_seed, rollout_episode, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> maac::Result<()> {
    let mut cfg = ExperimentConfig::default_for_task("coop_nav")?;
    for spec in [
        "learner.hidden=16",
        "learner.heads=2",
        "learner.batch_size=64",
        "learner.num_envs=4",
        "learner.episode_length=25",
        "learner.steps_per_update=100",
        "run.seed=12",
    ] {
        cfg.apply_override(spec)?;
    }
    cfg.resolve()?;
    println!("resolved config:\n{}", cfg.to_toml()?);

    let mut trainer = Trainer::new(cfg.environment.clone(), cfg.learner.clone(), true)?;
    trainer.run(24, &mut |r| {
        if r.episode % 8 == 0 {
            println!("episode {:>3}: team return {:>8.2}", r.episode, r.team_return);
        }
    })?;

    let dir = std::env::temp_dir().join("maac_pipeline_example");
    std::fs::create_dir_all(&dir)?;
    let ckpt_path = dir.join("demo.maac");
    save_checkpoint(
        &ckpt_path,
        trainer.learner(),
        &cfg,
        trainer.episodes_done(),
        trainer.total_env_steps(),
    )?;
    println!(
        "\nsaved {} ({} bytes)",
        ckpt_path.display(),
        std::fs::metadata(&ckpt_path)?.len()
    );

    let restored = load_checkpoint(&ckpt_path)?;
    let live = param_hash(trainer.learner());
    let loaded = param_hash(&restored.learner);
    println!("parameter hash live   {}", &live[..20]);
    println!("parameter hash loaded {}", &loaded[..20]);
    assert_eq!(live, loaded);

    // Evaluate from the restored learner; hash again afterwards.
    let mut env = maac::envsim::Environment::new(restored.config.environment.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(restored.config.run.seed, 4));
    let mut team = Vec::new();
    for ep in 0..10 {
        let (r, _) =
            rollout_episode(restored.learner.policies(), &mut env, 500 + ep, &mut rng, false)?;
        team.push(r.iter().sum::<f64>() / r.len() as f64);
    }
    let mean = team.iter().sum::<f64>() / team.len() as f64;
    println!("\neval mean team return over 10 episodes: {mean:.2}");
    assert_eq!(param_hash(&restored.learner), loaded, "evaluation must not learn");
    println!("parameters unchanged after evaluation");
    Ok(())
}
