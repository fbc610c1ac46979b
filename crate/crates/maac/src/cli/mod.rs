//! Experiment front end. Five subcommands cover the whole workflow:
//! `train`, `eval`, `inspect-attention`, `scaling`, `dump-config`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error. The
//! `MAAC_SEED` environment variable beats every other seed source.

pub mod checkpoint;
pub mod config;
pub mod metrics;

pub use checkpoint::{load_checkpoint, param_hash, save_checkpoint, Checkpoint};
pub use config::{ExperimentConfig, RunConfig};
pub use metrics::{
    export_csv, mean_and_ci95, read_metrics, MetricsRecord, MetricsWriter, METRICS_SCHEMA,
};

use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::critics::Critic;
use crate::envsim::{Environment, TaskConfig};
use crate::error::{Error, Result};
use crate::learner::{derive_seed, rollout_episode, Algorithm, Trainer};

pub const SEED_ENV: &str = "MAAC_SEED";

#[derive(Parser)]
#[command(name = "maac", version, about = "Attention-critic multi-agent RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train agents; writes a manifest, metrics, and checkpoints.
    Train(TrainArgs),
    /// Roll out a checkpoint without learning and summarize rewards.
    Eval(EvalArgs),
    /// Dump per-step attention weights from a checkpoint.
    InspectAttention(InspectArgs),
    /// Train every requested algorithm across agent counts and tabulate.
    Scaling(ScalingArgs),
    /// Print the fully resolved config.
    DumpConfig(ConfigArgs),
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stock task instead of a file: ctc, rover_tower or coop_nav.
    #[arg(long)]
    task: Option<String>,
    /// Dotted-path override such as learner.gamma=0.95; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed; beats the config, loses to MAAC_SEED.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Episode budget; defaults to run.episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Output directory; defaults to run.out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 selects the deterministic single-threaded path.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Resume from a checkpoint written by an identical config.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Also export metrics.csv next to metrics.jsonl.
    #[arg(long)]
    export_csv: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint to evaluate; it carries its own config.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Evaluation episodes.
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Optional config to cross-check against the embedded one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed; beats the checkpoint's, loses to MAAC_SEED.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct InspectArgs {
    /// Checkpoint with an attention critic.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Episodes to trace.
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    /// Dump destination (JSON lines).
    #[arg(long, default_value = "attention.jsonl")]
    out: PathBuf,
    /// Seed; beats the checkpoint's, loses to MAAC_SEED.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Total agent counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "4,8,12")]
    counts: Vec<usize>,
    /// Algorithms to compare.
    #[arg(long, value_delimiter = ',', default_value = "maac,maddpg_sac")]
    algorithms: Vec<String>,
    /// Training episodes per cell.
    #[arg(long, default_value_t = 12)]
    episodes: usize,
    /// Worker threads; 1 selects the deterministic single-threaded path.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

/// Entry point for the binary: parses arguments, runs one subcommand, and
/// maps errors onto exit codes.
pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::InspectAttention(args) => cmd_inspect_attention(args),
        Command::Scaling(args) => cmd_scaling(args),
        Command::DumpConfig(args) => cmd_dump_config(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Applies the seed flag, then the `MAAC_SEED` text, onto `run.seed`.
fn apply_seed_sources(
    cfg: &mut ExperimentConfig,
    flag: Option<u64>,
    env_text: Option<&str>,
) -> Result<()> {
    if let Some(seed) = flag {
        cfg.run.seed = seed;
    }
    if let Some(text) = env_text {
        let seed = text
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("{SEED_ENV}='{text}' is not an unsigned integer")))?;
        cfg.run.seed = seed;
    }
    Ok(())
}

fn load_config(args: &ConfigArgs, fallback_task: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.task) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("pass either --config or --task, not both".into()))
        }
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some(task)) => ExperimentConfig::default_for_task(task)?,
        (None, None) => match fallback_task {
            Some(task) => ExperimentConfig::default_for_task(task)?,
            None => {
                return Err(Error::Config(
                    "a config is required: pass --config FILE or --task NAME".into(),
                ))
            }
        },
    };
    for spec in &args.overrides {
        cfg.apply_override(spec)?;
    }
    let env_text = std::env::var(SEED_ENV).ok();
    apply_seed_sources(&mut cfg, args.seed, env_text.as_deref())?;
    cfg.resolve()?;
    Ok(cfg)
}

/// Returns true when the deterministic single-threaded path is requested;
/// otherwise sizes the global worker pool.
fn configure_threads(threads: usize) -> Result<bool> {
    if threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    if threads > 1 {
        // The pool can only be built once per process; later calls keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(threads == 1)
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg = load_config(&args.config, None)?;
    if let Some(out) = &args.out {
        cfg.run.out_dir = out.display().to_string();
    }
    let episodes = args.episodes.unwrap_or(cfg.run.episodes);
    let single_thread = configure_threads(args.threads)?;
    let out_dir = PathBuf::from(&cfg.run.out_dir);
    fs::create_dir_all(&out_dir)?;

    let manifest = format!(
        "# maac {} run manifest\n# task {}, algorithm {}\n\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.task_label(),
        cfg.learner.algorithm.label(),
        cfg.to_toml()?
    );
    fs::write(out_dir.join("manifest.toml"), &manifest)?;

    let mut trainer = Trainer::new(cfg.environment.clone(), cfg.learner.clone(), single_thread)?;
    let metrics_path = out_dir.join("metrics.jsonl");
    let mut writer = if args.resume.is_some() && metrics_path.exists() {
        MetricsWriter::append(&metrics_path)?
    } else {
        MetricsWriter::create(&metrics_path)?
    };
    if let Some(ckpt_path) = &args.resume {
        let ckpt = load_checkpoint(ckpt_path)?;
        if ckpt.config.to_toml()? != cfg.to_toml()? {
            return Err(Error::Checkpoint(
                "resume checkpoint was produced by a different config".into(),
            ));
        }
        trainer.restore(ckpt.learner, ckpt.episodes_done, ckpt.total_env_steps)?;
        println!(
            "resumed {} at episode {}",
            ckpt_path.display(),
            trainer.episodes_done()
        );
    }

    let started = Instant::now();
    let eval_interval = cfg.run.eval_interval;
    let mut next_checkpoint = (trainer.episodes_done() / eval_interval + 1) * eval_interval;
    let mut pending = Vec::new();
    while trainer.episodes_done() < episodes {
        trainer.run_round(&mut |report| pending.push(report))?;
        let mut last_team = f64::NAN;
        for report in pending.drain(..) {
            let wall = if single_thread { 0.0 } else { started.elapsed().as_secs_f64() };
            last_team = report.team_return;
            writer.write(&MetricsRecord::from_report(&report, wall))?;
        }
        writer.flush()?;
        if trainer.episodes_done() >= next_checkpoint && trainer.episodes_done() < episodes {
            let path =
                out_dir.join(format!("checkpoint_ep{:06}.maac", trainer.episodes_done()));
            save_checkpoint(
                &path,
                trainer.learner(),
                &cfg,
                trainer.episodes_done(),
                trainer.total_env_steps(),
            )?;
            println!(
                "episode {:>6}  team return {:>10.3}  wrote {}",
                trainer.episodes_done(),
                last_team,
                path.display()
            );
            while next_checkpoint <= trainer.episodes_done() {
                next_checkpoint += eval_interval;
            }
        }
    }
    writer.flush()?;
    save_checkpoint(
        &out_dir.join("checkpoint_final.maac"),
        trainer.learner(),
        &cfg,
        trainer.episodes_done(),
        trainer.total_env_steps(),
    )?;
    if args.export_csv {
        let records = read_metrics(&metrics_path)?;
        export_csv(&records, &out_dir.join("metrics.csv"))?;
    }
    println!(
        "trained {} episodes ({} env steps, {} update blocks) -> {}",
        trainer.episodes_done(),
        trainer.total_env_steps(),
        trainer.update_blocks(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    if let Some(path) = &args.config {
        let mut given = ExperimentConfig::load(path)?;
        given.resolve()?;
        if given.to_toml()? != ckpt.config.to_toml()? {
            return Err(Error::Checkpoint(
                "--config does not match the config embedded in the checkpoint".into(),
            ));
        }
    }
    let mut cfg = ckpt.config.clone();
    let env_text = std::env::var(SEED_ENV).ok();
    apply_seed_sources(&mut cfg, args.seed, env_text.as_deref())?;
    let seed = derive_seed(cfg.run.seed, 4);

    let hash_before = param_hash(&ckpt.learner);
    let mut env_cfg = cfg.environment.clone();
    env_cfg.episode_length = cfg.learner.episode_length;
    let mut env = Environment::new(env_cfg)?;
    let n = env.num_agents();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 5));
    let mut team = Vec::with_capacity(args.episodes);
    let mut per_agent = vec![Vec::with_capacity(args.episodes); n];
    for ep in 0..args.episodes {
        let (returns, _) = rollout_episode(
            ckpt.learner.policies(),
            &mut env,
            derive_seed(seed, 1000 + ep as u64),
            &mut rng,
            false,
        )?;
        team.push(returns.iter().sum::<f64>() / n as f64);
        for (acc, r) in per_agent.iter_mut().zip(&returns) {
            acc.push(*r);
        }
    }
    let hash_after = param_hash(&ckpt.learner);
    if hash_after != hash_before {
        return Err(Error::Contract("evaluation moved the parameters".into()));
    }

    println!(
        "checkpoint {} (algorithm {}, task {}, trained {} episodes)",
        args.checkpoint.display(),
        cfg.learner.algorithm.label(),
        cfg.task_label(),
        ckpt.episodes_done
    );
    let (mean, ci) = mean_and_ci95(&team);
    println!("team return: {mean:.6} +/- {ci:.6} (95% CI over {} episodes)", args.episodes);
    for (i, values) in per_agent.iter().enumerate() {
        let (mean, ci) = mean_and_ci95(values);
        println!("agent {i}: {mean:.6} +/- {ci:.6}");
    }
    println!("parameters unchanged: sha256 {}", &hash_after[..16]);
    Ok(())
}

#[derive(Serialize)]
struct EpisodeHeader<'a> {
    episode: usize,
    task: &'a str,
    num_agents: usize,
    heads: usize,
    /// Rover-Tower only: the tower agent paired with each rover.
    #[serde(skip_serializing_if = "Option::is_none")]
    pairing: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    goals: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct AttentionRow<'a> {
    episode: usize,
    step: usize,
    agent: usize,
    head: usize,
    /// Agent indices the columns of `alpha` refer to.
    others: &'a [usize],
    alpha: Vec<f64>,
    entropy: f64,
}

fn cmd_inspect_attention(args: &InspectArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    if !ckpt.learner.critic().has_attention() {
        return Err(Error::Checkpoint(format!(
            "checkpoint algorithm '{}' has no attention critic to inspect",
            ckpt.config.learner.algorithm.label()
        )));
    }
    let mut cfg = ckpt.config.clone();
    let env_text = std::env::var(SEED_ENV).ok();
    apply_seed_sources(&mut cfg, args.seed, env_text.as_deref())?;
    let seed = derive_seed(cfg.run.seed, 6);

    let mut env_cfg = cfg.environment.clone();
    env_cfg.episode_length = cfg.learner.episode_length;
    let mut env = Environment::new(env_cfg)?;
    let n = env.num_agents();
    let heads = cfg.learner.heads;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 5));
    let mut out = BufWriter::new(File::create(&args.out)?);

    let pairs = match cfg.environment.task {
        TaskConfig::RoverTower { pairs } => Some(pairs),
        _ => None,
    };
    let mut rows_written = 0usize;
    let mut entropy_sums = vec![vec![0.0; heads]; n];
    // Per rover: steps where the paired tower got the head-maximum weight
    // among all towers.
    let mut focus_hits = vec![0usize; pairs.unwrap_or(0)];
    let mut steps_total = 0usize;

    for episode in 0..args.episodes {
        let mut obs = env.reset(derive_seed(seed, 2000 + episode as u64));
        let pairing = pairs.map(|_| env.state().pairings.clone());
        let goals = pairs.map(|_| env.state().goals.clone());
        let header = EpisodeHeader {
            episode,
            task: cfg.task_label(),
            num_agents: n,
            heads,
            pairing: pairing.clone(),
            goals,
        };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;

        for step in 0..env.episode_length() {
            let mut actions = Vec::with_capacity(n);
            for i in 0..n {
                actions.push(ckpt.learner.policies()[i].sample(&obs[i], &mut rng)?.action);
            }
            for agent in 0..n {
                let mut masked: Vec<Option<usize>> = actions.iter().map(|&a| Some(a)).collect();
                masked[agent] = None;
                let (_, trace) = ckpt.learner.critic().q_values(agent, &obs, &masked)?;
                let trace = trace.expect("attention critic always yields a trace");
                let others: Vec<usize> = (0..n).filter(|&j| j != agent).collect();
                let mut head_max = vec![0.0f64; n];
                for h in 0..heads {
                    let alpha = trace.weights[agent][h].row(0).to_vec();
                    for (slot, &j) in others.iter().enumerate() {
                        head_max[j] = head_max[j].max(alpha[slot]);
                    }
                    let entropy = trace.row_entropy(agent, h, 0);
                    entropy_sums[agent][h] += entropy;
                    let row = AttentionRow {
                        episode,
                        step,
                        agent,
                        head: h,
                        others: &others,
                        alpha,
                        entropy,
                    };
                    writeln!(out, "{}", serde_json::to_string(&row)?)?;
                    rows_written += 1;
                }
                if let (Some(pairs), Some(pairing)) = (pairs, &pairing) {
                    if agent < pairs {
                        let paired = pairing[agent];
                        let best = (pairs..2 * pairs)
                            .filter(|&t| t != paired)
                            .all(|t| head_max[paired] > head_max[t]);
                        if best {
                            focus_hits[agent] += 1;
                        }
                    }
                }
            }
            steps_total += 1;
            let result = env.step(&actions)?;
            obs = result.observations;
        }
    }
    out.flush()?;

    println!("wrote {} attention rows to {}", rows_written, args.out.display());
    let step_count = steps_total.max(1) as f64;
    for (agent, sums) in entropy_sums.iter().enumerate() {
        let text: Vec<String> =
            sums.iter().map(|s| format!("{:.4}", s / step_count)).collect();
        println!("agent {agent} mean entropy by head: {}", text.join(" "));
    }
    if let Some(pairs) = pairs {
        for r in 0..pairs {
            println!(
                "rover {r}: paired tower held the max weight in {:.1}% of steps",
                100.0 * focus_hits[r] as f64 / steps_total.max(1) as f64
            );
        }
    }
    Ok(())
}

/// Rebuilds the task at a different total agent count.
fn scaled_task(template: &TaskConfig, count: usize) -> Result<TaskConfig> {
    if count == 0 {
        return Err(Error::Config("agent count must be positive".into()));
    }
    Ok(match *template {
        TaskConfig::Ctc { banks, .. } => {
            TaskConfig::Ctc { hunters: count, banks, treasures: count }
        }
        TaskConfig::RoverTower { .. } => {
            if count % 2 != 0 {
                return Err(Error::Config(format!(
                    "rover_tower needs an even agent count, got {count}"
                )));
            }
            TaskConfig::RoverTower { pairs: count / 2 }
        }
        TaskConfig::CoopNav { .. } => TaskConfig::CoopNav { agents: count },
    })
}

/// Widest per-agent input the critic consumes; the structural quantity the
/// scaling table reports.
fn per_agent_critic_width(critic: &Critic) -> usize {
    let n = critic.num_agents();
    match critic {
        Critic::Attention(c) => (0..n).map(|i| c.encoder_input_dim(i)).max().unwrap_or(0),
        Critic::Concat(c) => (0..n).map(|i| c.input_dim(i)).max().unwrap_or(0),
    }
}

fn cmd_scaling(args: &ScalingArgs) -> Result<()> {
    let template = load_config(&args.config, Some("rover_tower"))?;
    let single_thread = configure_threads(args.threads)?;
    if args.counts.is_empty() {
        return Err(Error::Config("--counts must name at least one agent count".into()));
    }
    let algorithms: Vec<Algorithm> =
        args.algorithms.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    if algorithms.is_empty() {
        return Err(Error::Config("--algorithms must name at least one algorithm".into()));
    }

    struct Row {
        count: usize,
        algorithm: Algorithm,
        width: usize,
        final_reward: f64,
        normalized: f64,
    }
    let mut rows: Vec<Row> = Vec::new();
    let mut pair_bounds: Vec<f64> = Vec::new();

    for &count in &args.counts {
        let mut cfg = template.clone();
        cfg.environment.task = scaled_task(&template.environment.task, count)?;
        if matches!(cfg.environment.task, TaskConfig::RoverTower { .. }) {
            // Reward is -dist(rover, goal); the arena diagonal bounds it
            // independently of how many pairs share the arena.
            pair_bounds.push(2.0 * std::f64::consts::SQRT_2 * cfg.environment.physics.arena_half);
        }
        let mut cells: Vec<(Algorithm, usize, f64)> = Vec::new();
        for &algorithm in &algorithms {
            let mut cell_cfg = cfg.clone();
            cell_cfg.learner.algorithm = algorithm;
            cell_cfg.resolve()?;
            let mut trainer =
                Trainer::new(cell_cfg.environment.clone(), cell_cfg.learner.clone(), single_thread)?;
            let mut team = Vec::new();
            trainer.run(args.episodes, &mut |report| team.push(report.team_return))?;
            let window = (team.len() / 4).max(1);
            let final_reward =
                team[team.len() - window..].iter().sum::<f64>() / window as f64;
            let width = per_agent_critic_width(trainer.learner().critic());
            cells.push((algorithm, width, final_reward));
        }
        let lo = cells.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        let hi = cells.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
        for (algorithm, width, final_reward) in cells {
            let normalized =
                if hi > lo { (final_reward - lo) / (hi - lo) } else { 1.0 };
            rows.push(Row { count, algorithm, width, final_reward, normalized });
        }
    }

    if let Some(&first) = pair_bounds.first() {
        if pair_bounds.iter().any(|&b| b != first) {
            return Err(Error::Contract(
                "per-pair reward bound varied with the agent count".into(),
            ));
        }
        println!("per-pair step reward range: [{:.6}, 0] at every count", -first);
    }
    println!(
        "{:<6} {:<13} {:>12} {:>14} {:>11}",
        "count", "algorithm", "critic_width", "final_reward", "normalized"
    );
    for row in &rows {
        println!(
            "{:<6} {:<13} {:>12} {:>14.4} {:>11.4}",
            row.count,
            row.algorithm.label(),
            row.width,
            row.final_reward,
            row.normalized
        );
    }
    Ok(())
}

fn cmd_dump_config(args: &ConfigArgs) -> Result<()> {
    let cfg = load_config(args, None)?;
    print!("{}", cfg.to_toml()?);
    Ok(())
}
