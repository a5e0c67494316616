use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use navlab::config::RunConfig;
use navlab::eval::{evaluate_cell, load_checkpoint, CellKey, MeanPolicy, Policy, SampledPolicy};
use navlab::plot::{read_train_log, render_sweep, render_training};
use navlab::replay::replay_episode;
use navlab::selftest;
use navlab::sweep::{csv_row, read_results_file, run_sweep, with_thread_override, SweepKind, SweepOptions, SweepSpec, RESULTS_HEADER};
use navlab_core::filters::{DenoiserKind, FilterConfig};
use navlab_core::nn::{save_policy, ActorCritic};
use navlab_core::noise::NoiseSpec;
use navlab_core::ppo::Trainer;

#[derive(Parser)]
#[command(name = "navlab", version, about = "PPO waypoint navigation under noisy localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write its checkpoint and training log.
    Train {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint in a single noise cell.
    Eval {
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the config's effective noise.
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Defaults to `filter.kind`.
        #[arg(long)]
        denoiser: Option<DenoiserKind>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Sample actions instead of using the policy mean.
        #[arg(long)]
        stochastic: bool,
    },
    /// Evaluate a checkpoint over a grid of noise cells.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        kind: SweepKind,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        /// Keep completed rows of an existing output file.
        #[arg(long)]
        resume: bool,
    },
    /// Render SVG charts from sweep results or training logs.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// unbiased, bias_only, biased or training.
        #[arg(long)]
        kind: String,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// Record and render one episode.
    Replay {
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        denoiser: Option<DenoiserKind>,
        #[arg(long, default_value = "replay")]
        out: PathBuf,
    },
    /// Run the built-in oracle checks.
    Selftest,
}

fn policy_for(model: ActorCritic<f32>, stochastic: bool) -> Box<dyn Policy> {
    if stochastic {
        Box::new(SampledPolicy(model))
    } else {
        Box::new(MeanPolicy(model))
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_train(config: &Path, seed: u64, out: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write(&out.join("config.toml"), &toml::to_string(&cfg).context("cannot serialize config")?)?;
    let mut trainer = Trainer::new(cfg.train_config(), seed)?;
    let total = cfg.ppo.num_updates();
    while !trainer.is_done() {
        let stats = trainer.run_update()?;
        let n = trainer.updates_done();
        if n % 10 == 0 || n == total {
            let last = trainer.log().episodes.last();
            eprintln!(
                "update {n}/{total} step {} mean100_return {} mean100_len {} value_loss {:.4} clip_frac {:.3}",
                trainer.timesteps(),
                last.map(|r| format!("{:.1}", r.mean100_return)).unwrap_or_else(|| "-".into()),
                last.map(|r| format!("{:.1}", r.mean100_len)).unwrap_or_else(|| "-".into()),
                stats.value_loss,
                stats.clip_frac
            );
        }
        if cfg.ppo.checkpoint_every > 0 && n % cfg.ppo.checkpoint_every == 0 && n < total {
            save_policy(&out.join(format!("policy_{n:05}.ckpt")), trainer.policy())?;
        }
    }
    save_policy(&out.join("policy.ckpt"), trainer.policy())?;
    let mut log = Vec::new();
    trainer.log().write_csv(&mut log)?;
    fs::write(out.join("trainlog.csv"), log).context("cannot write training log")?;
    println!("{}", out.join("policy.ckpt").display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    config: &Path,
    checkpoint: &Path,
    mu: Option<f64>,
    sigma: Option<f64>,
    denoiser: Option<DenoiserKind>,
    episodes: Option<usize>,
    seed: Option<u64>,
    stochastic: bool,
) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let model = load_checkpoint(checkpoint)?;
    let noise = cfg.noise.effective();
    let key = CellKey::new(mu.unwrap_or(noise.mu), sigma.unwrap_or(noise.sigma), denoiser.unwrap_or(cfg.filter.kind));
    if !(key.sigma >= 0.0 && key.sigma.is_finite() && key.mu.is_finite()) {
        bail!("invalid noise: mu {} sigma {}", key.mu, key.sigma);
    }
    let policy = policy_for(model, stochastic || cfg.sweep.stochastic);
    let episodes = episodes.unwrap_or(cfg.sweep.episodes_per_cell);
    if episodes == 0 {
        bail!("--episodes must be positive");
    }
    let r = with_thread_override(|| {
        evaluate_cell(policy.as_ref(), &cfg.eval_env(), &cfg.filter, key, episodes, seed.unwrap_or(cfg.sweep.seed))
    })?;
    println!("{RESULTS_HEADER}");
    println!("{}", csv_row(&r));
    Ok(())
}

fn cmd_sweep(config: &Path, checkpoint: &Path, kind: SweepKind, out: &Path, episodes: Option<usize>, resume: bool) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(n) = episodes {
        cfg.sweep.episodes_per_cell = n;
    }
    if let Some(k) = cfg.sweep.kind {
        if k != kind {
            eprintln!("note: --kind {kind} overrides sweep.kind = {k}");
        }
    }
    let spec = SweepSpec::from_config(&cfg, kind, checkpoint.to_path_buf());
    let model = load_checkpoint(checkpoint)?;
    let policy = policy_for(model, spec.stochastic);
    let rows = run_sweep(&spec, policy.as_ref(), out, SweepOptions { resume, max_new_cells: None })?;
    eprintln!("{} cells written to {}", rows.len(), out.display());
    Ok(())
}

fn cmd_plot(inputs: &[PathBuf], kind: &str, out: &Path) -> Result<()> {
    let charts = if kind == "training" {
        let logs = inputs
            .iter()
            .map(|p| {
                let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let name = if name == "trainlog" {
                    p.parent().and_then(|d| d.file_name()).map(|s| s.to_string_lossy().into_owned()).unwrap_or(name)
                } else {
                    name
                };
                Ok((name, read_train_log(p)?))
            })
            .collect::<Result<Vec<_>>>()?;
        render_training(&logs)?
    } else {
        let kind: SweepKind = kind.parse().map_err(anyhow::Error::msg)?;
        let mut cells = Vec::new();
        for p in inputs {
            cells.extend(read_results_file(p)?);
        }
        render_sweep(&cells, kind)?
    };
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    for (name, svg) in charts {
        let path = out.join(name);
        write(&path, &svg)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_replay(
    config: &Path,
    checkpoint: &Path,
    seed: u64,
    mu: Option<f64>,
    sigma: Option<f64>,
    denoiser: Option<DenoiserKind>,
    out: &Path,
) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let model = load_checkpoint(checkpoint)?;
    let noise = cfg.noise.effective();
    let noise = NoiseSpec { mu: mu.unwrap_or(noise.mu), sigma: sigma.unwrap_or(noise.sigma) };
    let filter = FilterConfig { kind: denoiser.unwrap_or(cfg.filter.kind), ..cfg.filter.clone() };
    let rec = replay_episode(&MeanPolicy(model), &cfg.eval_env(), noise, &filter, seed)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut csv = Vec::new();
    rec.write_csv(&mut csv)?;
    fs::write(out.join("trajectory.csv"), csv).context("cannot write trajectory")?;
    write(&out.join("trajectory.svg"), &rec.render_svg())?;
    println!(
        "outcome {:?} after {} steps; measurement rmse {:.4}, estimate rmse {:.4}",
        rec.outcome,
        rec.steps.len() - 1,
        rec.measured_rmse(),
        rec.estimate_rmse()
    );
    Ok(())
}

fn cmd_selftest() -> Result<()> {
    let checks = selftest::run_all();
    for c in &checks {
        println!("{} {:<22} {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        bail!("{failed} selftest check(s) failed");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, seed, out } => cmd_train(&config, seed, &out),
        Command::Eval { config, checkpoint, mu, sigma, denoiser, episodes, seed, stochastic } => {
            cmd_eval(&config, &checkpoint, mu, sigma, denoiser, episodes, seed, stochastic)
        }
        Command::Sweep { config, checkpoint, kind, out, episodes, resume } => cmd_sweep(&config, &checkpoint, kind, &out, episodes, resume),
        Command::Plot { inputs, kind, out } => cmd_plot(&inputs, &kind, &out),
        Command::Replay { config, checkpoint, seed, mu, sigma, denoiser, out } => {
            cmd_replay(&config, &checkpoint, seed, mu, sigma, denoiser, &out)
        }
        Command::Selftest => cmd_selftest(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
