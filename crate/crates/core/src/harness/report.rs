//! Tables derived from collected run records.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

use super::config::Strategy;
use super::grid::{CellKey, RunRecord};
use super::stats::{
    anova_from_summaries, pairwise_from_summaries, paired_one_sided, Adjustment, Anova, ComparisonRow, Descriptive,
    STATS_HEADER,
};

/// Significance level for the dominance check.
pub const DOMINANCE_ALPHA: f64 = 0.05;

fn by_cell(records: &[RunRecord]) -> BTreeMap<CellKey, BTreeMap<Strategy, Vec<&RunRecord>>> {
    let mut out: BTreeMap<CellKey, BTreeMap<Strategy, Vec<&RunRecord>>> = BTreeMap::new();
    for r in records {
        out.entry(r.cell()).or_default().entry(r.strategy).or_default().push(r);
    }
    for strategies in out.values_mut() {
        for v in strategies.values_mut() {
            v.sort_by_key(|r| r.rep);
        }
    }
    out
}

fn mean(v: &[&RunRecord]) -> f64 {
    v.iter().map(|r| r.total_reward).sum::<f64>() / v.len() as f64
}

/// `100 (adaptive - comparator) / comparator`, undefined for a
/// non-positive comparator.
pub fn improvement_pct(adaptive_mean: f64, comparator_mean: f64) -> Option<f64> {
    (comparator_mean > 0.0).then(|| 100.0 * (adaptive_mean - comparator_mean) / comparator_mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementRow {
    pub cell: CellKey,
    pub comparator: Strategy,
    pub adaptive_mean: f64,
    pub comparator_mean: f64,
    /// `None` when the comparator mean is not positive.
    pub improvement_pct: Option<f64>,
    pub abs_diff: f64,
}

/// Improvement of the adaptive strategy over every comparator, per cell.
/// Cells without adaptive records (failed training) are skipped.
pub fn improvement_table(records: &[RunRecord]) -> Result<Vec<ImprovementRow>> {
    let mut out = Vec::new();
    for (cell, strategies) in by_cell(records) {
        let Some(adaptive) = strategies.get(&Strategy::Adaptive) else {
            continue;
        };
        let a = mean(adaptive);
        for (&s, recs) in &strategies {
            if s == Strategy::Adaptive {
                continue;
            }
            let c = mean(recs);
            out.push(ImprovementRow {
                cell,
                comparator: s,
                adaptive_mean: a,
                comparator_mean: c,
                improvement_pct: improvement_pct(a, c),
                abs_diff: a - c,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::Data("no cell has both adaptive and comparator records".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceRow {
    pub cell: CellKey,
    pub adaptive_mean: f64,
    /// Comparator with the highest mean.
    pub best: Strategy,
    pub best_mean: f64,
    /// Paired t of adaptive minus best.
    pub t: f64,
    /// One-sided p for adaptive > best.
    pub p: f64,
}

impl DominanceRow {
    pub fn dominates(&self) -> bool {
        self.adaptive_mean >= self.best_mean && self.p < DOMINANCE_ALPHA
    }
}

/// Adaptive versus the best comparator in each cell, paired by seed.
pub fn dominance_table(records: &[RunRecord]) -> Result<Vec<DominanceRow>> {
    let mut out = Vec::new();
    for (cell, strategies) in by_cell(records) {
        let Some(adaptive) = strategies.get(&Strategy::Adaptive) else {
            continue;
        };
        let Some((&best, recs)) = strategies
            .iter()
            .filter(|(s, _)| **s != Strategy::Adaptive)
            .max_by(|a, b| mean(a.1).total_cmp(&mean(b.1)))
        else {
            continue;
        };
        if adaptive.iter().map(|r| r.seed).ne(recs.iter().map(|r| r.seed)) {
            return Err(Error::Data(format!("cell {} is not paired by seed", cell.label())));
        }
        let a: Vec<f64> = adaptive.iter().map(|r| r.total_reward).collect();
        let b: Vec<f64> = recs.iter().map(|r| r.total_reward).collect();
        let (t, p) = paired_one_sided(&a, &b)?;
        out.push(DominanceRow {
            cell,
            adaptive_mean: mean(adaptive),
            best,
            best_mean: mean(recs),
            t,
            p,
        });
    }
    Ok(out)
}

/// Omnibus and pairwise statistics with every cell and replication pooled
/// per strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub descriptives: Vec<(Strategy, Descriptive)>,
    pub anova: Anova,
    /// Adaptive against each comparator, unadjusted.
    pub lsd: Vec<ComparisonRow>,
    pub bonferroni: Vec<ComparisonRow>,
}

impl StatsReport {
    pub fn from_records(records: &[RunRecord]) -> Result<Self> {
        let mut pooled: BTreeMap<Strategy, Vec<f64>> = BTreeMap::new();
        for r in records {
            pooled.entry(r.strategy).or_default().push(r.total_reward);
        }
        let descriptives = pooled
            .iter()
            .map(|(s, v)| Ok((*s, Descriptive::of(v)?)))
            .collect::<Result<Vec<_>>>()?;
        let reference = descriptives
            .iter()
            .position(|(s, _)| *s == Strategy::Adaptive)
            .ok_or_else(|| Error::Data("no adaptive records to compare against".into()))?;
        let names: Vec<String> = descriptives.iter().map(|(s, _)| s.to_string()).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let summaries: Vec<Descriptive> = descriptives.iter().map(|d| d.1).collect();
        Ok(Self {
            anova: anova_from_summaries(&summaries)?,
            lsd: pairwise_from_summaries(&names, &summaries, reference, Adjustment::None)?,
            bonferroni: pairwise_from_summaries(&names, &summaries, reference, Adjustment::Bonferroni)?,
            descriptives,
        })
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_comparisons(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(STATS_HEADER)?;
    for r in rows {
        w.write_record([
            r.comparison.clone(),
            r.mean_diff.to_string(),
            r.se.to_string(),
            r.p.to_string(),
            r.ci_lo.to_string(),
            r.ci_hi.to_string(),
        ])?;
    }
    finish(w, path)
}

/// Writes `stats.csv`, `stats_bonferroni.csv`, `anova.csv`,
/// `descriptives.csv`, `improvement.csv` and `dominance.csv` into `dir`.
/// When the pooled statistics are undefined the two comparison files carry
/// only their header and the reason is returned.
pub fn write_reports(dir: &Path, records: &[RunRecord]) -> Result<Option<String>> {
    let mut problem = None;
    match StatsReport::from_records(records) {
        Ok(report) => {
            write_comparisons(&dir.join("stats.csv"), &report.lsd)?;
            write_comparisons(&dir.join("stats_bonferroni.csv"), &report.bonferroni)?;
            let path = dir.join("anova.csv");
            let mut w = writer(&path)?;
            w.write_record(["f", "df_between", "df_within", "p"])?;
            let a = report.anova;
            w.write_record([a.f.to_string(), a.df_between.to_string(), a.df_within.to_string(), a.p.to_string()])?;
            finish(w, &path)?;
            let path = dir.join("descriptives.csv");
            let mut w = writer(&path)?;
            w.write_record(["strategy", "n", "mean", "sd", "se"])?;
            for (s, d) in &report.descriptives {
                w.write_record([s.to_string(), d.n.to_string(), d.mean.to_string(), d.sd.to_string(), d.se().to_string()])?;
            }
            finish(w, &path)?;
        }
        Err(e) => {
            log::warn!("pooled statistics unavailable: {e}");
            write_comparisons(&dir.join("stats.csv"), &[])?;
            write_comparisons(&dir.join("stats_bonferroni.csv"), &[])?;
            problem = Some(e.to_string());
        }
    }

    let path = dir.join("improvement.csv");
    let mut w = writer(&path)?;
    w.write_record([
        "group",
        "env",
        "stage",
        "comparator",
        "adaptive_mean",
        "comparator_mean",
        "improvement_pct",
        "abs_diff",
        "flagged",
    ])?;
    for r in improvement_table(records).unwrap_or_default() {
        w.write_record([
            r.cell.group.to_string(),
            r.cell.env.to_string(),
            r.cell.stage.to_string(),
            r.comparator.to_string(),
            r.adaptive_mean.to_string(),
            r.comparator_mean.to_string(),
            r.improvement_pct.map(|p| p.to_string()).unwrap_or_default(),
            r.abs_diff.to_string(),
            r.improvement_pct.is_none().to_string(),
        ])?;
    }
    finish(w, &path)?;

    let path = dir.join("dominance.csv");
    let mut w = writer(&path)?;
    w.write_record(["group", "env", "stage", "adaptive_mean", "best_strategy", "best_mean", "t", "p_one_sided", "dominates"])?;
    for r in dominance_table(records)? {
        w.write_record([
            r.cell.group.to_string(),
            r.cell.env.to_string(),
            r.cell.stage.to_string(),
            r.adaptive_mean.to_string(),
            r.best.to_string(),
            r.best_mean.to_string(),
            r.t.to_string(),
            r.p.to_string(),
            r.dominates().to_string(),
        ])?;
    }
    finish(w, &path)?;
    Ok(problem)
}
