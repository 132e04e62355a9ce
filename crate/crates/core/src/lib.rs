//! Personalized exercise goal setting on a fitness-fatigue user model.

pub mod agents;
pub mod data;
pub mod dynamics;
pub mod env;
pub mod harness;
pub mod error;
pub mod nn;

pub use dynamics::{GoalAction, HealthState, IntensityGroup, SkillStage, UserProfile};
pub use env::{BehaviorModel, EnvId, EpisodeConfig, EpisodeRecord, Policy, TrendSchedule};
pub use error::{Error, Result};
