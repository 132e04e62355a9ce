use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::env::{rollout, EpisodeConfig};
use crate::error::Result;
use crate::nn::NetParams;

use super::mix_seed;
use super::policy::NetPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Global environment steps consumed so far.
    pub step: usize,
    /// Completed training episodes so far.
    pub episodes: usize,
    pub eval_mean: f64,
    pub eval_std: f64,
}

/// Greedy evaluation reward recorded during training, by global step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn final_mean(&self) -> Option<f64> {
        self.points.last().map(|p| p.eval_mean)
    }

    /// First step from which every later evaluation mean stays within
    /// `tolerance` (relative) of the final mean.
    pub fn converging_step(&self, tolerance: f64) -> Option<usize> {
        let last = self.final_mean()?;
        let band = tolerance * last.abs();
        let mut first = self.points.len() - 1;
        for (i, p) in self.points.iter().enumerate().rev() {
            if (p.eval_mean - last).abs() <= band {
                first = i;
            } else {
                break;
            }
        }
        Some(self.points[first].step)
    }

    /// Episode counter at the converging step.
    pub fn converging_episodes(&self, tolerance: f64) -> Option<usize> {
        let step = self.converging_step(tolerance)?;
        self.points.iter().find(|p| p.step == step).map(|p| p.episodes)
    }

    /// CSV with columns `step,eval_mean,eval_std`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "eval_mean", "eval_std"])?;
        for p in &self.points {
            w.write_record([p.step.to_string(), p.eval_mean.to_string(), p.eval_std.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Seeds of the held-out episodes used for learning-curve evaluation.
pub fn eval_seeds(train_seed: u64, n: usize) -> impl Iterator<Item = u64> {
    (0..n as u64).map(move |i| mix_seed(train_seed ^ 0x5EED_E7A1, i))
}

pub(crate) fn evaluate_curve_point(
    params: &NetParams,
    template: &EpisodeConfig,
    episodes: usize,
    train_seed: u64,
    step: usize,
    episodes_done: usize,
) -> Result<CurvePoint> {
    let mut policy = NetPolicy::greedy("eval", params.clone());
    let totals = eval_seeds(train_seed, episodes)
        .map(|seed| rollout(&mut policy, &template.with_seed(seed)).map(|r| r.total_reward))
        .collect::<Result<Vec<_>>>()?;
    let (eval_mean, eval_std) = mean_std(&totals);
    Ok(CurvePoint {
        step,
        episodes: episodes_done,
        eval_mean,
        eval_std,
    })
}
