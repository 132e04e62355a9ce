//! Goal-setting policies: the asynchronous actor-critic agent, its
//! architecture ablations, a DQN competitor, and fixed baselines.

mod a3c;
mod baseline;
mod curve;
mod dqn;
mod policy;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{rollout, EpisodeConfig, EpisodeRecord, Policy};
use crate::error::{Error, Result};
use crate::nn::{Architecture, NetParams, NetSpec};

pub use a3c::{a3c_train, n_step_returns, TrainConfig};
pub use baseline::{fixed_policy, no_service_policy, FixedPolicy};
pub use curve::{eval_seeds, CurvePoint, LearningCurve};
pub use dqn::{dqn_train, DqnConfig};
pub use policy::{sample_index, ActionMode, NetPolicy};

/// Relative band used to define the converging step of a learning curve.
pub const CONVERGENCE_TOLERANCE: f64 = 0.05;

/// SplitMix64 finalizer over a pair, used to derive independent seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Final parameters, or the last evaluated ones if training diverged.
    pub params: NetParams,
    pub curve: LearningCurve,
    /// Global environment steps consumed.
    pub steps: usize,
    /// Completed training episodes.
    pub episodes: usize,
    pub updates: usize,
    pub rejected_updates: usize,
    /// Reason training was aborted, if it was.
    pub diverged: Option<String>,
}

impl TrainOutcome {
    pub fn into_result(self) -> Result<Self> {
        match &self.diverged {
            Some(reason) => Err(Error::Divergence(reason.clone())),
            None => Ok(self),
        }
    }

    pub fn policy(&self, name: impl Into<String>) -> NetPolicy {
        NetPolicy::greedy(name, self.params.clone())
    }
}

/// Trainable agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Actor-critic on the recurrent + dense network.
    A3cHybrid,
    A3cMlp,
    A3cLstm,
    DqnHybrid,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::A3cHybrid, Algorithm::A3cMlp, Algorithm::A3cLstm, Algorithm::DqnHybrid];

    pub fn architecture(&self) -> Architecture {
        match self {
            Algorithm::A3cHybrid | Algorithm::DqnHybrid => Architecture::hybrid(),
            Algorithm::A3cMlp => Architecture::mlp(),
            Algorithm::A3cLstm => Architecture::lstm_only(),
        }
    }

    pub fn train(&self, template: &EpisodeConfig, cfg: &TrainConfig, dqn: &DqnConfig, window: usize) -> Result<TrainOutcome> {
        let spec = NetSpec::new(self.architecture()).with_window(window);
        match self {
            Algorithm::DqnHybrid => dqn_train(template, cfg, dqn, spec),
            _ => a3c_train(template, cfg, spec),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::A3cHybrid => "a3c-hybrid",
            Algorithm::A3cMlp => "a3c-mlp",
            Algorithm::A3cLstm => "a3c-lstm",
            Algorithm::DqnHybrid => "dqn-hybrid",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// A3C on the MLP trunk.
pub fn a3c_mlp(template: &EpisodeConfig, cfg: &TrainConfig, window: usize) -> Result<TrainOutcome> {
    a3c_train(template, cfg, NetSpec::new(Architecture::mlp()).with_window(window))
}

/// A3C on the recurrent trunk without the dense layer.
pub fn a3c_lstm(template: &EpisodeConfig, cfg: &TrainConfig, window: usize) -> Result<TrainOutcome> {
    a3c_train(template, cfg, NetSpec::new(Architecture::lstm_only()).with_window(window))
}

/// Runs `n_reps` episodes of `policy` on every config; replication `i` uses
/// seed `base_seed + i` so strategies evaluated with the same base seed are
/// paired. Replications are split across `workers` threads, each with its own
/// policy clone; output order does not depend on `workers`.
pub fn evaluate<P>(
    policy: &P,
    configs: &[EpisodeConfig],
    n_reps: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<Vec<EpisodeRecord>>>
where
    P: Policy + Clone + Send,
{
    if n_reps == 0 {
        return Err(Error::domain("need at least one replication"));
    }
    let workers = workers.clamp(1, n_reps);
    configs
        .iter()
        .map(|cfg| {
            let run = |range: std::ops::Range<usize>, mut p: P| -> Result<Vec<EpisodeRecord>> {
                range
                    .map(|i| rollout(&mut p, &cfg.with_seed(base_seed.wrapping_add(i as u64))))
                    .collect()
            };
            if workers == 1 {
                return run(0..n_reps, policy.clone());
            }
            let chunk = n_reps.div_ceil(workers);
            let parts: Vec<Result<Vec<EpisodeRecord>>> = std::thread::scope(|scope| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        let range = (w * chunk).min(n_reps)..((w + 1) * chunk).min(n_reps);
                        let p = policy.clone();
                        let run = &run;
                        scope.spawn(move || run(range, p))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
            });
            let mut out = Vec::with_capacity(n_reps);
            for part in parts {
                out.extend(part?);
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{SkillStage, UserProfile};
    use crate::env::{BehaviorModel, EnvId};

    fn cfg() -> EpisodeConfig {
        EpisodeConfig::new(EnvId::E2, SkillStage::Acquisition, UserProfile::default(), BehaviorModel::default(), 0)
            .unwrap()
    }

    #[test]
    fn evaluation_is_paired_and_repeatable() {
        let p = fixed_policy(0.4).unwrap();
        let a = evaluate(&p, &[cfg()], 6, 100, 1).unwrap();
        let b = evaluate(&p, &[cfg()], 6, 100, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].len(), 6);
        assert_eq!(a[0][2].seed, 102);
        let n = evaluate(&no_service_policy(), &[cfg()], 6, 100, 1).unwrap();
        for (x, y) in a[0].iter().zip(&n[0]) {
            assert_eq!(x.seed, y.seed);
            assert_eq!(x.epochs[0].state, y.epochs[0].state);
        }
        assert!(evaluate(&p, &[cfg()], 0, 0, 1).is_err());
    }

    #[test]
    fn no_service_ignores_network_weights() {
        let a = evaluate(&no_service_policy(), &[cfg()], 3, 7, 1).unwrap();
        let trained = NetPolicy::greedy("x", NetParams::init(NetSpec::new(Architecture::hybrid()), 1));
        let _ = evaluate(&trained, &[cfg()], 3, 7, 1).unwrap();
        let b = evaluate(&no_service_policy(), &[cfg()], 3, 7, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn algorithm_names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert!("ppo".parse::<Algorithm>().is_err());
    }

    #[test]
    fn seeds_are_mixed() {
        assert_ne!(mix_seed(1, 0), mix_seed(0, 1));
        assert_ne!(mix_seed(0, 0), mix_seed(0, 1));
    }
}
