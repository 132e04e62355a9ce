use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fitgoal::agents::{fixed_policy, no_service_policy, Algorithm, NetPolicy, CONVERGENCE_TOLERANCE};
use fitgoal::data::{
    estimate_profile, load_sessions, load_vo2max, normalize, synth_g1, trimp_series, user_id_from_path, write_profiles,
    EstimationResult, ProfileRow, ProfileSource,
};
use fitgoal::env::{rollout, EpisodeRecord, Policy};
use fitgoal::harness::{
    evaluate_cell, read_results, resolve_group, run_grid, sensitivity_sweep, sweep_trend, timing_report, train_agent,
    write_grid_outputs, write_reports, write_results, write_sweep, write_timing, CellKey, Config, Group, Strategy,
    SweepAxis,
};
use fitgoal::nn::{load_checkpoint, save_checkpoint};
use fitgoal::{EnvId, EpisodeConfig, Error, Result, SkillStage};

#[derive(Parser)]
#[command(name = "fitgoal", version, about = "Adaptive exercise goal setting experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides `experiment.reps`.
    #[arg(long, global = true, value_name = "N")]
    reps: Option<usize>,
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides `experiment.workers`.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Single-threaded training for byte-identical outputs.
    #[arg(long, global = true)]
    deterministic: bool,
}

/// Selects one grid cell; unset fields take the first configured value.
#[derive(Args, Clone)]
struct CellArgs {
    #[arg(long)]
    group: Option<Group>,
    #[arg(long)]
    env: Option<EnvId>,
    #[arg(long)]
    stage: Option<SkillStage>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and print its trajectory.
    Simulate {
        #[command(flatten)]
        cell: CellArgs,
        /// Named strategy; `adaptive` needs --checkpoint.
        #[arg(long, default_value = "no-service")]
        strategy: Strategy,
        /// Fixed goal level on the 0.1 grid; overrides --strategy.
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train the adaptive agent on one cell.
    Train {
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        algorithm: Option<Algorithm>,
    },
    /// Evaluate a checkpoint against the configured strategies on one cell.
    Evaluate {
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train and evaluate every configured cell.
    Grid,
    /// Recompute the statistics from a results file.
    Stats {
        /// Defaults to `<out>/results.csv`.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Sensitivity of the adaptive reward to the intervention weights.
    Sweep {
        #[command(flatten)]
        cell: CellArgs,
    },
    /// Fit a profile from heart-rate sessions and VO2max readings, and/or
    /// export synthetic profiles.
    Estimate {
        #[arg(long, requires = "vo2max")]
        sessions: Option<PathBuf>,
        #[arg(long, requires = "sessions")]
        vo2max: Option<PathBuf>,
        #[arg(long, default_value = "acquisition")]
        stage: SkillStage,
        /// Also export this many synthetic walking profiles.
        #[arg(long, default_value_t = 0)]
        synthetic: usize,
    },
    /// Training time, convergence and inference latency per algorithm.
    Timing {
        #[command(flatten)]
        cell: CellArgs,
    },
}

fn load_config(g: &Global) -> Result<Config> {
    let mut cfg = match &g.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let x = &mut cfg.experiment;
    if let Some(s) = g.seed {
        x.seed = s;
    }
    if let Some(r) = g.reps {
        x.reps = r;
    }
    if let Some(w) = g.workers {
        x.workers = w;
    }
    x.deterministic |= g.deterministic;
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn cell(cfg: &Config, args: &CellArgs) -> Result<(CellKey, EpisodeConfig)> {
    let key = CellKey {
        group: args.group.unwrap_or(cfg.experiment.groups[0]),
        env: args.env.unwrap_or(cfg.env.envs[0]),
        stage: args.stage.unwrap_or(cfg.env.stages[0]),
    };
    let user = resolve_group(cfg, key.group, key.stage)?;
    Ok((key, cfg.episode(key.env, key.stage, user.profile, user.behavior)?))
}

fn print_trajectory(rec: &EpisodeRecord, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["day", "e", "b", "f", "g", "action", "intensity", "reward"])?;
    for e in &rec.epochs {
        let s = e.state;
        w.write_record([
            e.day.to_string(),
            s.e.to_string(),
            s.b.to_string(),
            s.f.to_string(),
            s.g.to_string(),
            e.action.level().to_string(),
            e.intensity.to_string(),
            e.reward.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<stdout>".into(),
        source: e,
    })
}

fn fit_summary(fit: &EstimationResult) -> String {
    let p = fit.profile;
    format!(
        "alpha={:.4} beta={:.4} k_f={:.4} k_g={:.4} b0={:.4} rss={:.3e} evals={} converged={}",
        p.alpha, p.beta, p.k_f, p.k_g, fit.b0, fit.rss, fit.evaluations, fit.converged
    )
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    let out = &cli.global.out;
    match cli.command {
        Command::Simulate {
            cell: args,
            strategy,
            level,
            checkpoint,
        } => {
            let (key, template) = cell(&cfg, &args)?;
            let mut policy: Box<dyn Policy> = match (level, strategy, checkpoint) {
                (Some(l), _, _) if l == 0.0 => Box::new(no_service_policy()),
                (Some(l), _, _) => Box::new(fixed_policy(l)?),
                (None, Strategy::Adaptive, Some(path)) => Box::new(NetPolicy::greedy("adaptive", load_checkpoint(&path)?)),
                (None, Strategy::Adaptive, None) => {
                    return Err(Error::Config("the adaptive strategy needs --checkpoint".into()));
                }
                (None, s, _) => Box::new(s.fixed_policy().expect("non-adaptive strategies are fixed")),
            };
            let rec = rollout(&mut policy, &template.with_seed(key.seed(cfg.experiment.seed)))?;
            print_trajectory(&rec, std::io::stdout().lock())?;
            eprintln!("{} {}: total reward {}", key.label(), policy.name(), rec.total_reward);
        }
        Command::Train { cell: args, algorithm } => {
            let mut cfg = cfg;
            if let Some(a) = algorithm {
                cfg.agent.algorithm = a;
            }
            let (key, template) = cell(&cfg, &args)?;
            let outcome = train_agent(&cfg, &template, key.train_seed(cfg.experiment.seed))?;
            create_dir(out)?;
            save_checkpoint(&outcome.params, &out.join("checkpoint.ckpt"))?;
            let path = out.join("curve.csv");
            outcome.curve.write_csv(std::fs::File::create(&path).map_err(|e| Error::Io { path, source: e })?)?;
            println!(
                "{} {}: steps {} episodes {} final eval {:.3} converging step {}",
                key.label(),
                cfg.agent.algorithm,
                outcome.steps,
                outcome.episodes,
                outcome.curve.final_mean().unwrap_or(f64::NAN),
                outcome.curve.converging_step(CONVERGENCE_TOLERANCE).map_or("-".into(), |s| s.to_string()),
            );
        }
        Command::Evaluate { cell: args, checkpoint } => {
            let (key, template) = cell(&cfg, &args)?;
            let params = load_checkpoint(&checkpoint)?;
            let records = evaluate_cell(&cfg, key, &template, Some(&params))?;
            create_dir(out)?;
            write_results(out.join("results.csv"), &records)?;
            if let Some(reason) = write_reports(out, &records)? {
                eprintln!("statistics skipped: {reason}");
            }
            for s in &cfg.experiment.strategies {
                let v: Vec<f64> = records.iter().filter(|r| r.strategy == *s).map(|r| r.total_reward).collect();
                println!("{s:>16} mean {:.3}", v.iter().sum::<f64>() / v.len() as f64);
            }
        }
        Command::Grid => {
            let grid = run_grid(&cfg)?;
            if let Some(reason) = write_grid_outputs(out, &cfg, &grid)? {
                eprintln!("statistics skipped: {reason}");
            }
            let failed = grid.cells.iter().filter(|c| c.failure.is_some()).count();
            println!("{} cells, {} records, {failed} failed; outputs in {}", grid.cells.len(), grid.records().len(), out.display());
        }
        Command::Stats { results } => {
            let path = results.unwrap_or_else(|| out.join("results.csv"));
            let records = read_results(&path)?;
            create_dir(out)?;
            if let Some(reason) = write_reports(out, &records)? {
                return Err(Error::Data(reason));
            }
            print!("{}", std::fs::read_to_string(out.join("stats.csv")).map_err(|e| Error::Io { path, source: e })?);
        }
        Command::Sweep { cell: args } => {
            let (key, template) = cell(&cfg, &args)?;
            let x = &cfg.experiment;
            let points = sensitivity_sweep(&cfg, &template, &x.sweep_m, &x.sweep_l, x.reps, key.seed(x.seed))?;
            create_dir(out)?;
            write_sweep(&out.join("sweep.csv"), &points)?;
            fitgoal::harness::write_plot_script(out)?;
            for axis in [SweepAxis::M, SweepAxis::L] {
                match sweep_trend(&points, axis) {
                    Ok(rho) => println!("spearman(reward, {axis}) = {rho:.3}"),
                    Err(e) => println!("spearman(reward, {axis}) undefined: {e}"),
                }
            }
        }
        Command::Estimate {
            sessions,
            vo2max,
            stage,
            synthetic,
        } => {
            let mut rows = Vec::new();
            if let (Some(s), Some(v)) = (sessions, vo2max) {
                let user = user_id_from_path(&s);
                let load = normalize(&trimp_series(user.clone(), &load_sessions(&s)?)?)?;
                let fit = estimate_profile(&load, &load_vo2max(&v)?, stage, &cfg.experiment.estimate)?;
                println!("{user}: {}", fit_summary(&fit));
                rows.push(ProfileRow {
                    user_id: user,
                    profile: fit.profile,
                    source: ProfileSource::Fitted,
                });
            }
            if synthetic > 0 {
                for u in synth_g1(synthetic, cfg.experiment.seed)? {
                    rows.push(ProfileRow {
                        user_id: u.steps.user_id.clone(),
                        profile: u.profile,
                        source: ProfileSource::Synthetic,
                    });
                }
            }
            if rows.is_empty() {
                return Err(Error::Config("nothing to estimate; pass --sessions and --vo2max or --synthetic N".into()));
            }
            create_dir(out)?;
            write_profiles(out.join("profiles.csv"), &rows)?;
            println!("{} profiles written to {}", rows.len(), out.join("profiles.csv").display());
        }
        Command::Timing { cell: args } => {
            let (key, template) = cell(&cfg, &args)?;
            let rows = timing_report(&cfg, &template, &cfg.experiment.timing_algorithms, key.train_seed(cfg.experiment.seed))?;
            create_dir(out)?;
            write_timing(&out.join("timing.csv"), &rows)?;
            for r in &rows {
                println!(
                    "{:>11}: train {:.2}s, converging step {}, inference {:.2} us/decision, episode {:.2} ms",
                    r.algorithm.to_string(),
                    r.train_seconds,
                    r.converging_step.map_or("-".into(), |s| s.to_string()),
                    r.inference_us,
                    r.episode_ms
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
