//! Simulated user: behavior-trend schedules, the stochastic response to a
//! suggested goal, and the episode loop.
//!
//! Each decision epoch the agent proposes a goal, the user realizes an
//! intensity drawn around a mixture of their trend-scaled intent and the goal,
//! the health state is advanced, and the reward is evaluated on the new state.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, GoalAction, HealthState, SkillStage, UserProfile};
use crate::error::{Error, Result};

/// Length of the reference service period the E1-E4 schedules are written for.
pub const REFERENCE_HORIZON: usize = 84;

/// Day (0-indexed) on which the week-6 trend change takes effect.
pub const TREND_CHANGE_DAY: usize = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnvId {
    E1,
    E2,
    E3,
    E4,
    Custom,
}

impl EnvId {
    pub const STANDARD: [EnvId; 4] = [EnvId::E1, EnvId::E2, EnvId::E3, EnvId::E4];
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EnvId::E1 => "E1",
            EnvId::E2 => "E2",
            EnvId::E3 => "E3",
            EnvId::E4 => "E4",
            EnvId::Custom => "Custom",
        };
        f.write_str(s)
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "E1" => Ok(EnvId::E1),
            "E2" => Ok(EnvId::E2),
            "E3" => Ok(EnvId::E3),
            "E4" => Ok(EnvId::E4),
            "CUSTOM" => Ok(EnvId::Custom),
            other => Err(Error::domain(format!("unknown environment {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Breakpoint {
    pub start_day: usize,
    pub multiplier: f64,
}

/// Piecewise-constant multiplier applied to the user's intrinsic intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendSchedule {
    pub env_id: EnvId,
    pub breakpoints: Vec<Breakpoint>,
}

impl TrendSchedule {
    pub fn standard(env: EnvId) -> Result<Self> {
        let bp = |start_day, multiplier| Breakpoint { start_day, multiplier };
        let breakpoints = match env {
            EnvId::E1 => vec![bp(0, 1.0)],
            EnvId::E2 => vec![bp(0, 1.0), bp(TREND_CHANGE_DAY, 1.4)],
            EnvId::E3 => vec![bp(0, 1.0), bp(TREND_CHANGE_DAY, 2.0)],
            // Both phases are relative to the original baseline, not compounded.
            EnvId::E4 => vec![bp(0, 0.8), bp(TREND_CHANGE_DAY, 1.6)],
            EnvId::Custom => return Err(Error::domain("custom schedules need explicit breakpoints")),
        };
        Ok(Self { env_id: env, breakpoints })
    }

    pub fn custom(breakpoints: Vec<Breakpoint>) -> Result<Self> {
        let s = Self { env_id: EnvId::Custom, breakpoints };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .breakpoints
            .first()
            .ok_or_else(|| Error::domain("trend schedule has no breakpoints"))?;
        if first.start_day != 0 {
            return Err(Error::domain("first breakpoint must start on day 0"));
        }
        if self.breakpoints.windows(2).any(|w| w[1].start_day <= w[0].start_day) {
            return Err(Error::domain("breakpoints must be strictly increasing in start_day"));
        }
        if self.breakpoints.iter().any(|b| !(b.multiplier.is_finite() && b.multiplier > 0.0)) {
            return Err(Error::domain("trend multipliers must be positive and finite"));
        }
        Ok(())
    }

    /// Rescales breakpoint days from the 84-day reference period to `horizon`
    /// days, flooring each start day. Breakpoints that collide are dropped in
    /// favor of the later one.
    pub fn compressed(&self, horizon: usize) -> Self {
        let mut out: Vec<Breakpoint> = Vec::with_capacity(self.breakpoints.len());
        for b in &self.breakpoints {
            let start_day = b.start_day * horizon / REFERENCE_HORIZON;
            match out.last_mut() {
                Some(last) if last.start_day == start_day => last.multiplier = b.multiplier,
                _ => out.push(Breakpoint { start_day, multiplier: b.multiplier }),
            }
        }
        Self {
            env_id: self.env_id,
            breakpoints: out,
        }
    }
}

/// Multiplier of the last breakpoint starting on or before `day`.
pub fn trend_multiplier(schedule: &TrendSchedule, day: i64) -> Result<f64> {
    if day < 0 {
        return Err(Error::domain(format!("negative day {day}")));
    }
    let day = day as usize;
    schedule
        .breakpoints
        .iter()
        .take_while(|b| b.start_day <= day)
        .last()
        .map(|b| b.multiplier)
        .ok_or_else(|| Error::domain("trend schedule has no breakpoint at day 0"))
}

/// How the user responds to suggestions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BehaviorModel {
    /// Mean intrinsic intensity before trend scaling, in `(0, 1]`.
    pub baseline: f64,
    /// Standard deviation of the response noise.
    pub sigma: f64,
    /// Fraction of behavior drawn toward the suggested goal.
    pub rho: f64,
}

impl Default for BehaviorModel {
    fn default() -> Self {
        Self {
            baseline: 0.5,
            sigma: 0.1,
            rho: 0.3,
        }
    }
}

impl BehaviorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.baseline > 0.0 && self.baseline <= 1.0) {
            return Err(Error::domain(format!("baseline {} outside (0, 1]", self.baseline)));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::domain(format!("sigma {} must be >= 0", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::domain(format!("rho {} outside [0, 1]", self.rho)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    /// Number of decision epochs (days).
    pub horizon: usize,
    pub stage: SkillStage,
    pub profile: UserProfile,
    pub trend: TrendSchedule,
    pub behavior: BehaviorModel,
    pub seed: u64,
}

impl EpisodeConfig {
    pub fn new(env: EnvId, stage: SkillStage, profile: UserProfile, behavior: BehaviorModel, seed: u64) -> Result<Self> {
        let cfg = Self {
            horizon: REFERENCE_HORIZON,
            stage,
            profile,
            trend: TrendSchedule::standard(env)?,
            behavior,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::domain("horizon must be at least one epoch"));
        }
        self.profile.validate()?;
        self.behavior.validate()?;
        self.trend.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Same environment squeezed into `horizon` days, trend breakpoints rescaled.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            trend: self.trend.compressed(horizon),
            ..self.clone()
        }
    }

    pub fn initial_state(&self) -> HealthState {
        HealthState {
            e: 0.0,
            b: self.behavior.baseline,
            f: 0.0,
            g: 0.0,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Realized intensity for `day` given the suggestion. Consumes exactly one
/// standard-normal draw from `rng` whatever the noise level, so strategies that
/// share a seed see the same noise sequence.
pub fn sample_behavior(cfg: &EpisodeConfig, day: usize, action: GoalAction, rng: &mut ChaCha8Rng) -> Result<f64> {
    let z: f64 = StandardNormal.sample(rng);
    let intent = (trend_multiplier(&cfg.trend, day as i64)? * cfg.behavior.baseline).clamp(0.0, 1.0);
    let noise = cfg.behavior.sigma * z;
    let mean = if action.is_service() {
        let rho = cfg.behavior.rho;
        (1.0 - rho) * intent + rho * action.level()
    } else {
        intent
    };
    Ok((mean + noise).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: HealthState,
    pub intensity: f64,
    pub reward: f64,
}

/// One epoch of the interaction loop.
pub fn step(
    state: &HealthState,
    action: GoalAction,
    cfg: &EpisodeConfig,
    day: usize,
    rng: &mut ChaCha8Rng,
) -> Result<StepOutcome> {
    let intensity = sample_behavior(cfg, day, action, rng)?;
    let next = dynamics::update_state(state, intensity, &cfg.profile)?;
    let reward = dynamics::reward(&next, action, &cfg.profile, cfg.stage);
    Ok(StepOutcome { next, intensity, reward })
}

/// What a policy sees at the start of an epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    /// State entering the epoch.
    pub state: HealthState,
    /// Goal issued in the previous epoch (no-service at day 0).
    pub prev_action: GoalAction,
    pub day: usize,
    pub horizon: usize,
}

impl Frame {
    pub const FEATURES: usize = 6;

    /// Network inputs. The unbounded stocks are squashed with `x / (1 + x)`
    /// so every feature lies in `[0, 1]` and recurrent gates do not saturate.
    pub fn features(&self) -> [f64; Self::FEATURES] {
        [
            self.state.e,
            self.state.b,
            self.state.f / (1.0 + self.state.f),
            self.state.g / (1.0 + self.state.g),
            self.prev_action.level(),
            self.day as f64 / self.horizon as f64,
        ]
    }
}

/// A goal-setting strategy.
pub trait Policy {
    fn name(&self) -> String;

    /// Clears per-episode state.
    fn reset(&mut self) {}

    /// Picks the goal for the latest frame in `history` (oldest first).
    fn select_action(&mut self, history: &[Frame]) -> Result<GoalAction>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn reset(&mut self) {
        (**self).reset()
    }

    fn select_action(&mut self, history: &[Frame]) -> Result<GoalAction> {
        (**self).select_action(history)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub day: usize,
    /// State entering the epoch.
    pub state: HealthState,
    pub action: GoalAction,
    pub intensity: f64,
    pub reward: f64,
}

/// Per-epoch trajectory and total reward of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub total_reward: f64,
}

/// Stateful wrapper around [`step`] used by rollouts and training loops.
#[derive(Debug, Clone)]
pub struct Episode {
    cfg: EpisodeConfig,
    rng: ChaCha8Rng,
    history: Vec<Frame>,
}

impl Episode {
    pub fn new(cfg: EpisodeConfig) -> Result<Self> {
        cfg.validate()?;
        let rng = cfg.rng();
        let first = Frame {
            state: cfg.initial_state(),
            prev_action: GoalAction::NO_SERVICE,
            day: 0,
            horizon: cfg.horizon,
        };
        let mut history = Vec::with_capacity(cfg.horizon + 1);
        history.push(first);
        Ok(Self { cfg, rng, history })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    /// Frames seen so far, oldest first; the last one is the current epoch.
    pub fn history(&self) -> &[Frame] {
        &self.history
    }

    pub fn day(&self) -> usize {
        self.history.len() - 1
    }

    pub fn is_done(&self) -> bool {
        self.day() >= self.cfg.horizon
    }

    pub fn step(&mut self, action: GoalAction) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::domain("episode already finished"));
        }
        let day = self.day();
        let state = self.history[day].state;
        let out = step(&state, action, &self.cfg, day, &mut self.rng)?;
        self.history.push(Frame {
            state: out.next,
            prev_action: action,
            day: day + 1,
            horizon: self.cfg.horizon,
        });
        Ok(out)
    }
}

/// Runs `policy` for a full episode.
pub fn rollout<P: Policy + ?Sized>(policy: &mut P, cfg: &EpisodeConfig) -> Result<EpisodeRecord> {
    let mut episode = Episode::new(cfg.clone())?;
    policy.reset();
    let mut epochs = Vec::with_capacity(cfg.horizon);
    let mut total = 0.0;
    while !episode.is_done() {
        let day = episode.day();
        let state = episode.history()[day].state;
        let action = policy
            .select_action(episode.history())
            .map_err(|e| Error::Policy(format!("{} at day {day}: {e}", policy.name())))?;
        let out = episode.step(action)?;
        total += out.reward;
        epochs.push(EpochRecord {
            day,
            state,
            action,
            intensity: out.intensity,
            reward: out.reward,
        });
    }
    Ok(EpisodeRecord {
        seed: cfg.seed,
        epochs,
        total_reward: total,
    })
}
