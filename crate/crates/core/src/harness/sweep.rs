//! Sensitivity of the adaptive agent's reward to the intervention weights.

use std::fmt;
use std::path::Path;

use crate::agents::{evaluate, NetPolicy};
use crate::env::EpisodeConfig;
use crate::error::{Error, Result};

use super::config::Config;
use super::grid::train_agent;
use super::stats::{spearman, Descriptive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// Motivation weight `m` varies, `l` fixed.
    M,
    /// Disutility weight `l` varies, `m` fixed.
    L,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::M => "m",
            SweepAxis::L => "l",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub m: f64,
    pub l: f64,
    /// NaN when the point failed.
    pub mean: f64,
    pub sd: f64,
    pub reps: usize,
    pub failed: Option<String>,
}

impl SweepPoint {
    pub fn value(&self) -> f64 {
        match self.axis {
            SweepAxis::M => self.m,
            SweepAxis::L => self.l,
        }
    }
}

/// Evaluates the adaptive agent at every `m` (with the template's `l`) and
/// every `l` (with the template's `m`). Points share training and
/// evaluation seeds so they differ only through the swept weight.
pub fn sensitivity_sweep(
    cfg: &Config,
    template: &EpisodeConfig,
    m_values: &[f64],
    l_values: &[f64],
    n_reps: usize,
    base_seed: u64,
) -> Result<Vec<SweepPoint>> {
    if m_values.is_empty() && l_values.is_empty() {
        return Err(Error::domain("sweep needs at least one m or l value"));
    }
    if n_reps == 0 {
        return Err(Error::domain("sweep needs at least one replication"));
    }
    let train_seed = crate::agents::mix_seed(base_seed, 0x5EE9);
    let shared = if cfg.experiment.sweep_reuse_agent {
        Some(train_agent(cfg, template, train_seed).map(|t| t.params))
    } else {
        None
    };
    let points = m_values
        .iter()
        .map(|&m| (SweepAxis::M, m, template.profile.l))
        .chain(l_values.iter().map(|&l| (SweepAxis::L, template.profile.m, l)));
    let mut out = Vec::new();
    for (axis, m, l) in points {
        let mut cell = template.clone();
        cell.profile.m = m;
        cell.profile.l = l;
        cell.validate()?;
        let result: Result<Descriptive> = (|| {
            let params = match &shared {
                Some(Ok(p)) => p.clone(),
                Some(Err(e)) => return Err(Error::Divergence(e.to_string())),
                None => train_agent(cfg, &cell, train_seed)?.params,
            };
            let eps = evaluate(&NetPolicy::greedy("adaptive", params), &[cell.clone()], n_reps, base_seed, 1)?;
            Descriptive::of(&eps[0].iter().map(|e| e.total_reward).collect::<Vec<_>>())
        })();
        log::info!("sweep {axis} m={m} l={l}: {result:?}");
        out.push(match result {
            Ok(d) => SweepPoint {
                axis,
                m,
                l,
                mean: d.mean,
                sd: d.sd,
                reps: d.n,
                failed: None,
            },
            Err(e) => SweepPoint {
                axis,
                m,
                l,
                mean: f64::NAN,
                sd: f64::NAN,
                reps: n_reps,
                failed: Some(e.to_string()),
            },
        });
    }
    Ok(out)
}

/// Spearman correlation between the swept value and mean reward over the
/// points that did not fail.
pub fn sweep_trend(points: &[SweepPoint], axis: SweepAxis) -> Result<f64> {
    let ok: Vec<&SweepPoint> = points.iter().filter(|p| p.axis == axis && p.failed.is_none()).collect();
    let x: Vec<f64> = ok.iter().map(|p| p.value()).collect();
    let y: Vec<f64> = ok.iter().map(|p| p.mean).collect();
    spearman(&x, &y)
}

pub fn write_sweep(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["axis", "m", "l", "mean_reward", "sd", "reps", "failed"])?;
    for p in points {
        w.write_record([
            p.axis.to_string(),
            p.m.to_string(),
            p.l.to_string(),
            p.mean.to_string(),
            p.sd.to_string(),
            p.reps.to_string(),
            p.failed.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
