//! Experiment configuration file.
//!
//! ```toml
//! [profile]
//! alpha = 0.95
//! [env]
//! envs = ["E1", "E3"]
//! stages = ["acquisition"]
//! [behavior]
//! rho = 0.3
//! [agent]
//! algorithm = "a3c-hybrid"
//! [agent.train]
//! total_steps = 20000
//! [experiment]
//! groups = ["G1"]
//! reps = 30
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{fixed_policy, no_service_policy, Algorithm, DqnConfig, FixedPolicy, TrainConfig};
use crate::data::EstimateOptions;
use crate::dynamics::{SkillStage, UserProfile};
use crate::env::{BehaviorModel, Breakpoint, EnvId, EpisodeConfig, TrendSchedule, REFERENCE_HORIZON};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub profile: UserProfile,
    pub env: EnvSection,
    pub behavior: BehaviorModel,
    pub agent: AgentSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub envs: Vec<EnvId>,
    pub stages: Vec<SkillStage>,
    /// Decision epochs per episode. Trend change days are rescaled from the
    /// 84-day reference period.
    pub horizon: usize,
    /// Trend used by the `Custom` environment.
    pub breakpoints: Vec<Breakpoint>,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            envs: EnvId::STANDARD.to_vec(),
            stages: SkillStage::ALL.to_vec(),
            horizon: REFERENCE_HORIZON,
            breakpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub algorithm: Algorithm,
    /// Frames per observation window.
    pub window: usize,
    pub train: TrainConfig,
    pub dqn: DqnConfig,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::A3cHybrid,
            window: 7,
            train: TrainConfig::default(),
            dqn: DqnConfig::default(),
        }
    }
}

/// Data groups of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    /// Synthetic walking users.
    G1,
    /// Perceived-exertion logs.
    G2,
    /// Heart-rate sessions with VO2max readings.
    G3,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::G1, Group::G2, Group::G3];
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Group::ALL
            .into_iter()
            .find(|g| g.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown group {s:?}")))
    }
}

/// Strategies compared in the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// The trained agent.
    Adaptive,
    Weak,
    SlightlyWeak,
    SlightlyStrong,
    Strong,
    NoService,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Adaptive,
        Strategy::Weak,
        Strategy::SlightlyWeak,
        Strategy::SlightlyStrong,
        Strategy::Strong,
        Strategy::NoService,
    ];

    /// Goal level used for each fixed intensity group.
    pub fn fixed_level(&self) -> Option<f64> {
        match self {
            Strategy::Weak => Some(0.2),
            Strategy::SlightlyWeak => Some(0.4),
            Strategy::SlightlyStrong => Some(0.7),
            Strategy::Strong => Some(0.9),
            Strategy::Adaptive | Strategy::NoService => None,
        }
    }

    /// The non-adaptive policy, or `None` for the agent.
    pub fn fixed_policy(&self) -> Option<FixedPolicy> {
        match self {
            Strategy::Adaptive => None,
            Strategy::NoService => Some(no_service_policy()),
            s => Some(fixed_policy(s.fixed_level().expect("fixed strategies have a level")).expect("levels are on the grid")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Adaptive => "adaptive",
            Strategy::Weak => "weak",
            Strategy::SlightlyWeak => "slightly-weak",
            Strategy::SlightlyStrong => "slightly-strong",
            Strategy::Strong => "strong",
            Strategy::NoService => "no-service",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|g| g.to_string() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub groups: Vec<Group>,
    pub strategies: Vec<Strategy>,
    /// Evaluation replications per strategy and cell.
    pub reps: usize,
    pub seed: u64,
    /// Grid cells run concurrently.
    pub workers: usize,
    /// Forces single-threaded training so outputs are byte-reproducible.
    pub deterministic: bool,
    /// Train a fresh agent for every replication instead of once per cell.
    pub retrain_per_rep: bool,
    /// Users in the synthetic walking corpus.
    pub g1_users: usize,
    pub srpe: Option<PathBuf>,
    pub sessions: Option<PathBuf>,
    pub vo2max: Option<PathBuf>,
    pub sweep_m: Vec<f64>,
    pub sweep_l: Vec<f64>,
    /// Evaluate every sweep point with one agent trained at the base profile.
    pub sweep_reuse_agent: bool,
    pub timing_algorithms: Vec<Algorithm>,
    /// Forward passes averaged for the inference latency.
    pub inference_passes: usize,
    pub estimate: EstimateOptions,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            groups: vec![Group::G1],
            strategies: Strategy::ALL.to_vec(),
            reps: 30,
            seed: 0,
            workers: 1,
            deterministic: false,
            retrain_per_rep: false,
            g1_users: 20,
            srpe: None,
            sessions: None,
            vo2max: None,
            sweep_m: vec![0.0, 1.0, 2.0, 4.0],
            sweep_l: vec![0.0, 1.0, 2.0, 4.0],
            sweep_reuse_agent: false,
            timing_algorithms: vec![Algorithm::A3cHybrid, Algorithm::DqnHybrid],
            inference_passes: 10_000,
            estimate: EstimateOptions::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.experiment.srpe, &mut cfg.experiment.sessions, &mut cfg.experiment.vo2max]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.profile.validate().map_err(|e| Error::Config(format!("[profile] {e}")))?;
        self.behavior.validate().map_err(|e| Error::Config(format!("[behavior] {e}")))?;
        if self.env.envs.is_empty() || self.env.stages.is_empty() {
            return bad("[env] envs and stages must be nonempty".into());
        }
        if self.env.horizon == 0 {
            return bad("[env] horizon must be >= 1".into());
        }
        if self.env.envs.contains(&EnvId::Custom) {
            TrendSchedule::custom(self.env.breakpoints.clone()).map_err(|e| Error::Config(format!("[env] {e}")))?;
        }
        if self.agent.window == 0 {
            return bad("[agent] window must be >= 1".into());
        }
        self.agent.train.validate()?;
        let x = &self.experiment;
        if x.groups.is_empty() || x.strategies.is_empty() {
            return bad("[experiment] groups and strategies must be nonempty".into());
        }
        if x.reps == 0 || x.workers == 0 || x.g1_users == 0 || x.inference_passes == 0 {
            return bad("[experiment] reps, workers, g1_users and inference_passes must be >= 1".into());
        }
        if x.groups.contains(&Group::G2) && x.srpe.is_none() {
            return bad("[experiment] group G2 needs an srpe path".into());
        }
        if x.groups.contains(&Group::G3) && (x.sessions.is_none() || x.vo2max.is_none()) {
            return bad("[experiment] group G3 needs sessions and vo2max paths".into());
        }
        if x.sweep_m.iter().chain(&x.sweep_l).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("[experiment] sweep values must be finite and >= 0".into());
        }
        Ok(())
    }

    /// Training settings after applying the experiment seed and determinism flag.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let mut t = self.agent.train.clone();
        t.seed = seed;
        if self.experiment.deterministic {
            t.workers = 1;
        }
        t
    }

    pub fn trend(&self, env: EnvId) -> Result<TrendSchedule> {
        match env {
            EnvId::Custom => TrendSchedule::custom(self.env.breakpoints.clone()),
            e => TrendSchedule::standard(e),
        }
    }

    /// Episode template for one environment and stage with the given user.
    pub fn episode(&self, env: EnvId, stage: SkillStage, profile: UserProfile, behavior: BehaviorModel) -> Result<EpisodeConfig> {
        let cfg = EpisodeConfig {
            horizon: REFERENCE_HORIZON,
            stage,
            profile,
            trend: self.trend(env)?,
            behavior,
            seed: 0,
        };
        let cfg = if self.env.horizon == REFERENCE_HORIZON {
            cfg
        } else {
            cfg.with_horizon(self.env.horizon)
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
