//! Synthetic walking corpus: daily step counts and randomized user profiles.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::UserProfile;
use crate::error::Result;

use super::series::{IntensitySeries, IntensityUnit};

pub const STEPS_MEAN: f64 = 6274.0;
pub const STEPS_SD: f64 = 2106.0;
pub const SYNTH_DAYS: usize = 84;

/// Uniform sampling ranges for synthetic profiles, chosen inside the
/// validity bounds so every draw is a usable profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRanges {
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub lambda: (f64, f64),
    pub mu: (f64, f64),
    pub delta: (f64, f64),
    pub k_f: (f64, f64),
    pub k_g: (f64, f64),
    pub m: (f64, f64),
    pub l: (f64, f64),
}

impl Default for ProfileRanges {
    fn default() -> Self {
        Self {
            alpha: (0.8, 0.98),
            beta: (0.3, 0.8),
            lambda: (0.6, 1.0),
            mu: (1.2, 2.5),
            delta: (0.8, 0.98),
            k_f: (0.05, 0.3),
            k_g: (0.05, 0.3),
            m: (0.5, 2.0),
            l: (0.5, 2.0),
        }
    }
}

impl ProfileRanges {
    pub fn sample(&self, rng: &mut impl Rng) -> UserProfile {
        let mut u = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
        UserProfile {
            alpha: u(self.alpha),
            beta: u(self.beta),
            lambda: u(self.lambda),
            mu: u(self.mu),
            delta: u(self.delta),
            k_f: u(self.k_f),
            k_g: u(self.k_g),
            m: u(self.m),
            l: u(self.l),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUser {
    pub steps: IntensitySeries,
    pub profile: UserProfile,
}

fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid constant date")
}

/// Draws a step count from the walking distribution truncated at zero by
/// rejection.
fn draw_steps(normal: &Normal<f64>, rng: &mut impl Rng) -> f64 {
    loop {
        let v = normal.sample(rng);
        if v >= 0.0 {
            return v;
        }
    }
}

/// `n_users` users with 84 days of steps each; deterministic per seed.
pub fn synth_g1(n_users: usize, seed: u64) -> Result<Vec<SyntheticUser>> {
    if n_users == 0 {
        return Err(crate::error::Error::domain("need at least one synthetic user"));
    }
    let normal = Normal::new(STEPS_MEAN, STEPS_SD).expect("constant parameters are valid");
    let ranges = ProfileRanges::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_users)
        .map(|i| {
            let profile = ranges.sample(&mut rng);
            let samples = (0..SYNTH_DAYS)
                .map(|d| (start_date() + chrono::Duration::days(d as i64), draw_steps(&normal, &mut rng)))
                .collect();
            Ok(SyntheticUser {
                steps: IntensitySeries::new(format!("g1_{i:03}"), IntensityUnit::Steps, samples)?,
                profile,
            })
        })
        .collect()
}
