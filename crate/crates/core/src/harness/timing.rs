//! Training cost, convergence speed and inference latency per algorithm.

use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use crate::agents::{Algorithm, NetPolicy, CONVERGENCE_TOLERANCE};
use crate::dynamics::GoalAction;
use crate::env::{rollout, Episode, EpisodeConfig};
use crate::error::{Error, Result};
use crate::nn::{NetParams, ObservationWindow};

use super::config::Config;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub algorithm: Algorithm,
    pub train_seconds: f64,
    pub steps: usize,
    pub converging_step: Option<usize>,
    pub converging_episodes: Option<usize>,
    pub final_eval_mean: Option<f64>,
    /// Mean microseconds per forward pass.
    pub inference_us: f64,
    /// Mean milliseconds per greedy evaluation episode.
    pub episode_ms: f64,
    pub failed: Option<String>,
}

/// A window built from the first days of a no-service episode.
fn sample_window(params: &NetParams, template: &EpisodeConfig) -> Result<ObservationWindow> {
    let mut ep = Episode::new(template.clone())?;
    for _ in 0..params.spec().window.min(template.horizon) {
        ep.step(GoalAction::NO_SERVICE)?;
    }
    Ok(ObservationWindow::from_history(ep.history(), params.spec().window))
}

/// Mean seconds per forward pass over `passes` calls.
pub fn inference_latency(params: &NetParams, template: &EpisodeConfig, passes: usize) -> Result<f64> {
    if passes == 0 {
        return Err(Error::domain("need at least one forward pass"));
    }
    let window = sample_window(params, template)?;
    let start = Instant::now();
    for _ in 0..passes {
        black_box(params.forward(black_box(&window))?);
    }
    Ok(start.elapsed().as_secs_f64() / passes as f64)
}

/// Mean seconds per greedy episode of `params` on `template`.
pub fn episode_latency(params: &NetParams, template: &EpisodeConfig, episodes: usize) -> Result<f64> {
    let mut policy = NetPolicy::greedy("timing", params.clone());
    let start = Instant::now();
    for i in 0..episodes.max(1) {
        black_box(rollout(&mut policy, &template.with_seed(i as u64))?);
    }
    Ok(start.elapsed().as_secs_f64() / episodes.max(1) as f64)
}

/// Trains each algorithm under the same budget and seed on `template`.
pub fn timing_report(cfg: &Config, template: &EpisodeConfig, algorithms: &[Algorithm], seed: u64) -> Result<Vec<TimingRow>> {
    let train = cfg.train_config(seed);
    algorithms
        .iter()
        .map(|&algorithm| {
            let start = Instant::now();
            let outcome = algorithm.train(template, &train, &cfg.agent.dqn, cfg.agent.window)?;
            let train_seconds = start.elapsed().as_secs_f64();
            let curve = &outcome.curve;
            Ok(TimingRow {
                algorithm,
                train_seconds,
                steps: outcome.steps,
                converging_step: curve.converging_step(CONVERGENCE_TOLERANCE),
                converging_episodes: curve.converging_episodes(CONVERGENCE_TOLERANCE),
                final_eval_mean: curve.final_mean(),
                inference_us: 1e6 * inference_latency(&outcome.params, template, cfg.experiment.inference_passes)?,
                episode_ms: 1e3 * episode_latency(&outcome.params, template, 10)?,
                failed: outcome.diverged.clone(),
            })
        })
        .collect()
}

pub fn write_timing(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "algorithm",
        "train_seconds",
        "steps",
        "converging_step",
        "converging_episodes",
        "final_eval_mean",
        "inference_us",
        "episode_ms",
        "failed",
    ])?;
    for r in rows {
        w.write_record([
            r.algorithm.to_string(),
            format!("{:.3}", r.train_seconds),
            r.steps.to_string(),
            opt(r.converging_step),
            opt(r.converging_episodes),
            r.final_eval_mean.map(|v| v.to_string()).unwrap_or_default(),
            format!("{:.3}", r.inference_us),
            format!("{:.3}", r.episode_ms),
            r.failed.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SkillStage;
    use crate::env::EnvId;

    #[test]
    fn content_fields_are_deterministic() {
        let mut cfg = Config::default();
        cfg.env.horizon = 10;
        cfg.agent.train.total_steps = 400;
        cfg.agent.train.eval_interval = 100;
        cfg.agent.train.eval_episodes = 2;
        cfg.agent.dqn.warmup = 50;
        cfg.experiment.inference_passes = 50;
        let t = cfg.episode(EnvId::E1, SkillStage::Acquisition, cfg.profile, cfg.behavior).unwrap();
        let algs = [Algorithm::A3cHybrid, Algorithm::DqnHybrid];
        let a = timing_report(&cfg, &t, &algs, 4).unwrap();
        let b = timing_report(&cfg, &t, &algs, 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.algorithm, y.algorithm);
            assert_eq!(x.steps, 400);
            assert_eq!(x.converging_step, y.converging_step);
            assert_eq!(x.final_eval_mean, y.final_eval_mean);
            assert!(x.inference_us > 0.0 && x.episode_ms > 0.0);
        }
    }
}
