//! Deep Q-learning over the same trunk, reading Q values from the 10-way
//! policy head. Uniform replay, periodic hard target sync, epsilon-greedy
//! exploration with linear decay. Single-threaded.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::GoalAction;
use crate::env::{Episode, EpisodeConfig};
use crate::error::{Error, Result};
use crate::nn::{argmax, q_backward, NetParams, NetSpec, ObservationWindow, QSample};

use super::a3c::TrainConfig;
use super::curve::{evaluate_curve_point, LearningCurve};
use super::{mix_seed, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Environment steps between gradient updates.
    pub train_every: usize,
    /// Environment steps between target-network syncs.
    pub target_sync: usize,
    /// Transitions collected before learning starts.
    pub warmup: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the step budget over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub huber_delta: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            replay_capacity: 100_000,
            batch_size: 16,
            train_every: 4,
            target_sync: 1_000,
            warmup: 500,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            huber_delta: 1.0,
        }
    }
}

impl DqnConfig {
    pub fn epsilon_at(&self, step: usize, total: usize) -> f64 {
        let horizon = (self.epsilon_decay_fraction * total as f64).max(1.0);
        let frac = (step as f64 / horizon).min(1.0);
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }
}

#[derive(Debug, Clone)]
struct Transition {
    window: ObservationWindow,
    action: usize,
    reward: f64,
    next: Option<ObservationWindow>,
}

/// Fixed-capacity FIFO replay memory with uniform sampling.
#[derive(Debug)]
struct Replay {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl Replay {
    fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }
}

pub fn dqn_train(template: &EpisodeConfig, cfg: &TrainConfig, dqn: &DqnConfig, spec: NetSpec) -> Result<TrainOutcome> {
    cfg.validate()?;
    template.validate()?;
    if dqn.batch_size == 0 || dqn.train_every == 0 || dqn.target_sync == 0 || dqn.replay_capacity == 0 {
        return Err(Error::Config("DQN batch, cadence and capacity settings must be >= 1".into()));
    }
    let reward_scale = cfg.resolve_reward_scale(template)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0xD0_0001));
    let mut online = NetParams::init(spec, mix_seed(cfg.seed, 0x1417));
    let mut target = online.clone();
    let mut optimizer = cfg.optimizer(online.len());
    let mut replay = Replay {
        capacity: dqn.replay_capacity,
        items: VecDeque::new(),
    };
    let mut curve = LearningCurve::default();
    curve
        .points
        .push(evaluate_curve_point(&online, template, cfg.eval_episodes, cfg.seed, 0, 0)?);
    let mut last_valid = online.clone();
    let mut diverged = None;

    let worker_seed = mix_seed(cfg.seed, 0xA3C0);
    let mut episode_index = 0u64;
    let mut episodes = 0usize;
    let mut episode = Episode::new(template.with_seed(mix_seed(worker_seed, episode_index)))?;
    let window_len = spec.window;
    let mut window = ObservationWindow::from_history(episode.history(), window_len);

    for step in 0..cfg.total_steps {
        let epsilon = dqn.epsilon_at(step, cfg.total_steps);
        let action = if rng.random::<f64>() < epsilon {
            rng.random_range(0..spec.actions)
        } else {
            argmax(&online.forward(&window)?.logits)
        };
        let out = episode.step(GoalAction::from_index(action)?)?;
        let next = (!episode.is_done()).then(|| ObservationWindow::from_history(episode.history(), window_len));
        replay.push(Transition {
            window: window.clone(),
            action,
            reward: out.reward * reward_scale,
            next: next.clone(),
        });
        match next {
            Some(w) => window = w,
            None => {
                episodes += 1;
                episode_index += 1;
                episode = Episode::new(template.with_seed(mix_seed(worker_seed, episode_index)))?;
                window = ObservationWindow::from_history(episode.history(), window_len);
            }
        }

        let done = step + 1;
        if done >= dqn.warmup && done % dqn.train_every == 0 && !replay.items.is_empty() {
            let picks: Vec<usize> = (0..dqn.batch_size).map(|_| rng.random_range(0..replay.items.len())).collect();
            let targets = picks
                .iter()
                .map(|&i| {
                    let t = &replay.items[i];
                    let future = match &t.next {
                        Some(w) => {
                            let q = target.forward(w)?.logits;
                            q.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                        }
                        None => 0.0,
                    };
                    Ok(t.reward + cfg.gamma * future)
                })
                .collect::<Result<Vec<f64>>>()?;
            let batch: Vec<QSample<'_>> = picks
                .iter()
                .zip(&targets)
                .map(|(&i, &target)| {
                    let t = &replay.items[i];
                    QSample {
                        window: &t.window,
                        action: t.action,
                        target,
                    }
                })
                .collect();
            let update = q_backward(&online, &batch, dqn.huber_delta)
                .and_then(|(grads, _)| optimizer.apply(&mut online, grads));
            if let Err(e) = update {
                diverged = Some(e.to_string());
                break;
            }
            if !online.is_finite() {
                diverged = Some(format!("Q network became non-finite at step {done}"));
                break;
            }
        }
        if done % dqn.target_sync == 0 {
            target = online.clone();
        }
        if done % cfg.eval_interval == 0 || done == cfg.total_steps {
            let point = evaluate_curve_point(&online, template, cfg.eval_episodes, cfg.seed, done, episodes)?;
            if !point.eval_mean.is_finite() {
                diverged = Some(format!("evaluation reward is {} at step {done}", point.eval_mean));
                break;
            }
            last_valid = online.clone();
            curve.points.push(point);
        }
    }

    let steps = curve.points.last().map(|p| p.step).unwrap_or(0);
    Ok(TrainOutcome {
        params: if diverged.is_some() { last_valid } else { online },
        curve,
        steps,
        episodes,
        updates: optimizer.applied(),
        rejected_updates: optimizer.rejected(),
        diverged,
    })
}
