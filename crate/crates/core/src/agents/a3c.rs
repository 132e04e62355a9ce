//! Asynchronous advantage actor-critic training.
//!
//! `workers` threads share one [`ParameterStore`]. Each repeatedly snapshots
//! the shared weights, rolls its own environment forward for up to
//! `segment_len` epochs sampling goals from the policy head, forms n-step
//! returns bootstrapped from the value head, and applies the resulting
//! gradients to the store. Only single-worker runs are bit-reproducible.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::GoalAction;
use crate::env::{Episode, EpisodeConfig};
use crate::error::{Error, Result};
use crate::nn::{actor_critic_backward, LossCoefficients, NetParams, NetSpec, ObservationWindow, ParameterStore, RmsProp, SegmentSample};

use super::curve::{evaluate_curve_point, CurvePoint, LearningCurve};
use super::policy::sample_index;
use super::{mix_seed, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Number of asynchronous workers.
    pub workers: usize,
    /// Global environment-step budget.
    pub total_steps: usize,
    /// Discount used for training returns.
    pub gamma: f64,
    /// Rollout segment length between updates.
    pub segment_len: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub grad_clip: f64,
    /// Multiplier applied to rewards inside training only. When unset it is
    /// chosen so that discounted returns of a random policy are about one.
    pub reward_scale: Option<f64>,
    /// Global steps between learning-curve evaluations.
    pub eval_interval: usize,
    /// Episodes per learning-curve evaluation.
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            total_steps: 50_000,
            gamma: 0.99,
            segment_len: 20,
            learning_rate: 1e-3,
            entropy_coef: 0.01,
            value_coef: 0.5,
            rms_decay: 0.99,
            rms_epsilon: 1e-10,
            grad_clip: 40.0,
            reward_scale: None,
            eval_interval: 2_500,
            eval_episodes: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.workers == 0 {
            return bad("workers must be >= 1");
        }
        if self.segment_len == 0 || self.total_steps < self.segment_len {
            return bad("need total_steps >= segment_len >= 1");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.reward_scale.is_none_or(|s| s > 0.0) && self.grad_clip > 0.0) {
            return bad("learning_rate, reward_scale and grad_clip must be positive");
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return bad("eval_interval and eval_episodes must be >= 1");
        }
        Ok(())
    }

    /// The configured reward scale, or one over the mean absolute discounted
    /// return of a few uniformly random episodes on `template`.
    pub fn resolve_reward_scale(&self, template: &EpisodeConfig) -> Result<f64> {
        if let Some(s) = self.reward_scale {
            return Ok(s);
        }
        const PROBES: u64 = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, 0x5CA1E));
        let mut total = 0.0;
        for i in 0..PROBES {
            let mut episode = Episode::new(template.with_seed(mix_seed(self.seed, 0x5CA1E + i)))?;
            let mut rewards = Vec::new();
            while !episode.is_done() {
                let action = GoalAction::from_index(rng.random_range(0..GoalAction::SERVICE_LEVELS))?;
                rewards.push(episode.step(action)?.reward);
            }
            total += n_step_returns(&rewards, 0.0, self.gamma)[0].abs();
        }
        let mean = total / PROBES as f64;
        Ok(if mean > 1e-9 { 1.0 / mean } else { 1.0 })
    }

    pub fn coefficients(&self) -> LossCoefficients {
        LossCoefficients {
            entropy: self.entropy_coef,
            value: self.value_coef,
        }
    }

    pub fn optimizer(&self, n_params: usize) -> RmsProp {
        RmsProp::new(n_params, self.learning_rate, self.rms_decay, self.rms_epsilon, self.grad_clip)
    }
}

/// Discounted n-step targets, `R_t = r_t + gamma R_{t+1}`, seeded with `bootstrap`.
pub fn n_step_returns(rewards: &[f64], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    out
}

struct Shared<'a> {
    store: ParameterStore,
    steps: AtomicUsize,
    episodes: AtomicUsize,
    next_eval: AtomicUsize,
    stop: AtomicBool,
    failure: Mutex<Option<String>>,
    last_valid: Mutex<Option<NetParams>>,
    curve: Mutex<Vec<CurvePoint>>,
    template: &'a EpisodeConfig,
    cfg: &'a TrainConfig,
    reward_scale: f64,
}

/// Trains a network of shape `spec` on episodes drawn from `template` with
/// per-worker seeds.
pub fn a3c_train(template: &EpisodeConfig, cfg: &TrainConfig, spec: NetSpec) -> Result<TrainOutcome> {
    cfg.validate()?;
    template.validate()?;
    let init = NetParams::init(spec, mix_seed(cfg.seed, 0x1417));
    let optimizer = cfg.optimizer(init.len());
    let shared = Shared {
        store: ParameterStore::new(init.clone(), optimizer),
        steps: AtomicUsize::new(0),
        episodes: AtomicUsize::new(0),
        next_eval: AtomicUsize::new(cfg.eval_interval),
        stop: AtomicBool::new(false),
        failure: Mutex::new(None),
        last_valid: Mutex::new(Some(init.clone())),
        curve: Mutex::new(Vec::new()),
        template,
        cfg,
        reward_scale: cfg.resolve_reward_scale(template)?,
    };
    let first = evaluate_curve_point(&init, template, cfg.eval_episodes, cfg.seed, 0, 0)?;
    shared.curve.lock().unwrap().push(first);

    if cfg.workers == 1 {
        worker(&shared, 0);
    } else {
        std::thread::scope(|scope| {
            for w in 0..cfg.workers {
                let shared = &shared;
                scope.spawn(move || worker(shared, w));
            }
        });
    }

    let Shared {
        store,
        steps,
        episodes,
        failure,
        last_valid,
        curve,
        ..
    } = shared;
    let failure = failure.into_inner().unwrap();
    let steps = steps.into_inner().min(cfg.total_steps);
    let episodes = episodes.into_inner();
    let (params, optimizer) = store.into_inner();
    let params = match &failure {
        Some(_) => last_valid.into_inner().unwrap().unwrap_or(params),
        None => params,
    };
    let mut points = curve.into_inner().unwrap();
    if failure.is_none() && points.last().map(|p| p.step) != Some(steps) {
        points.push(evaluate_curve_point(&params, template, cfg.eval_episodes, cfg.seed, steps, episodes)?);
    }
    points.sort_by_key(|p| p.step);
    points.dedup_by_key(|p| p.step);
    Ok(TrainOutcome {
        params,
        curve: LearningCurve { points },
        steps,
        episodes,
        updates: optimizer.applied(),
        rejected_updates: optimizer.rejected(),
        diverged: failure,
    })
}

fn fail(shared: &Shared<'_>, reason: String) {
    let mut f = shared.failure.lock().unwrap();
    if f.is_none() {
        *f = Some(reason);
    }
    shared.stop.store(true, Ordering::SeqCst);
}

fn worker(shared: &Shared<'_>, id: usize) {
    if let Err(e) = run_worker(shared, id) {
        fail(shared, e.to_string());
    }
}

fn run_worker(shared: &Shared<'_>, id: usize) -> Result<()> {
    let cfg = shared.cfg;
    let worker_seed = mix_seed(cfg.seed, 0xA3C0 + id as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(worker_seed);
    let mut episode_index = 0u64;
    let mut episode = Episode::new(shared.template.with_seed(mix_seed(worker_seed, episode_index)))?;
    let window_len = shared.store.snapshot().spec().window;

    while !shared.stop.load(Ordering::SeqCst) {
        let params = shared.store.snapshot();
        let mut windows: Vec<ObservationWindow> = Vec::with_capacity(cfg.segment_len);
        let mut actions = Vec::with_capacity(cfg.segment_len);
        let mut rewards = Vec::with_capacity(cfg.segment_len);
        let mut budget_exhausted = false;

        while windows.len() < cfg.segment_len && !episode.is_done() {
            let claimed = shared.steps.fetch_add(1, Ordering::SeqCst);
            if claimed >= cfg.total_steps {
                budget_exhausted = true;
                break;
            }
            let window = ObservationWindow::from_history(episode.history(), window_len);
            let out = params.forward(&window)?;
            let index = sample_index(&out.logits, &mut rng);
            let step = episode.step(GoalAction::from_index(index)?)?;
            windows.push(window);
            actions.push(index);
            rewards.push(step.reward * shared.reward_scale);
            if claimed + 1 >= cfg.total_steps {
                budget_exhausted = true;
                break;
            }
        }

        if !windows.is_empty() {
            let bootstrap = if episode.is_done() {
                0.0
            } else {
                params.forward(&ObservationWindow::from_history(episode.history(), window_len))?.value
            };
            let targets = n_step_returns(&rewards, bootstrap, cfg.gamma);
            let segment: Vec<SegmentSample<'_>> = windows
                .iter()
                .zip(&actions)
                .zip(&targets)
                .map(|((window, &action), &target)| SegmentSample { window, action, target })
                .collect();
            let (grads, _) = actor_critic_backward(&params, &segment, cfg.coefficients())?;
            shared.store.apply(grads)?;
        }

        if episode.is_done() {
            shared.episodes.fetch_add(1, Ordering::SeqCst);
            episode_index += 1;
            episode = Episode::new(shared.template.with_seed(mix_seed(worker_seed, episode_index)))?;
        }

        maybe_evaluate(shared)?;
        if budget_exhausted {
            break;
        }
    }
    Ok(())
}

fn maybe_evaluate(shared: &Shared<'_>) -> Result<()> {
    let cfg = shared.cfg;
    let steps = shared.steps.load(Ordering::SeqCst).min(cfg.total_steps);
    let due = shared.next_eval.load(Ordering::SeqCst);
    if steps < due
        || shared
            .next_eval
            .compare_exchange(due, due + cfg.eval_interval, Ordering::SeqCst, Ordering::SeqCst)
            .is_err()
    {
        return Ok(());
    }
    let params = shared.store.snapshot();
    let point = evaluate_curve_point(
        &params,
        shared.template,
        cfg.eval_episodes,
        cfg.seed,
        steps,
        shared.episodes.load(Ordering::SeqCst),
    )?;
    if !point.eval_mean.is_finite() {
        return Err(Error::Divergence(format!("evaluation reward is {} at step {steps}", point.eval_mean)));
    }
    log::debug!(
        "step {steps} episodes {} eval mean {:.3} sd {:.3}",
        point.episodes,
        point.eval_mean,
        point.eval_std
    );
    *shared.last_valid.lock().unwrap() = Some(params);
    shared.curve.lock().unwrap().push(point);
    Ok(())
}
