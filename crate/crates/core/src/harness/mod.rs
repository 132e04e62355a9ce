//! Experiment harness: configuration, the strategy grid, statistics,
//! sensitivity sweeps and timing.

mod config;
mod grid;
mod plot;
mod report;
pub mod stats;
mod sweep;
mod timing;

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::save_checkpoint;

pub use config::{AgentSection, Config, EnvSection, ExperimentSection, Group, Strategy};
pub use grid::{
    evaluate_cell, grid_cells, read_results, read_results_from, resolve_group, run_cell, run_grid, train_agent, write_failures,
    write_results, write_results_to, CellKey, CellOutcome, GridOutput, GroupUser, RunRecord, RESULTS_HEADER,
};
pub use plot::{write_plot_script, PLOT_SCRIPT};
pub use report::{
    dominance_table, improvement_pct, improvement_table, write_comparisons, write_reports, DominanceRow,
    ImprovementRow, StatsReport, DOMINANCE_ALPHA,
};
pub use stats::{anova_oneway, pairwise_comparisons, spearman, Adjustment, Anova, ComparisonRow, Descriptive, STATS_HEADER};
pub use sweep::{sensitivity_sweep, sweep_trend, write_sweep, SweepAxis, SweepPoint};
pub use timing::{episode_latency, inference_latency, timing_report, write_timing, TimingRow};

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes every grid artifact into `dir`: results, failures, reports,
/// learning curves, checkpoints, the effective config and the plot script.
/// Returns the reason pooled statistics were skipped, if they were.
pub fn write_grid_outputs(dir: &Path, cfg: &Config, out: &GridOutput) -> Result<Option<String>> {
    create_dir(dir)?;
    let records = out.records();
    write_results(dir.join("results.csv"), &records)?;
    write_failures(dir.join("failures.csv"), &out.cells)?;
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| Error::io(cfg_path, e))?;
    let curves = dir.join("curves");
    let ckpts = dir.join("checkpoints");
    create_dir(&curves)?;
    create_dir(&ckpts)?;
    for cell in &out.cells {
        if let Some(curve) = &cell.curve {
            let path = curves.join(format!("{}.csv", cell.key.label()));
            curve.write_csv(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?)?;
        }
        if let Some(params) = &cell.params {
            save_checkpoint(params, &ckpts.join(format!("{}.ckpt", cell.key.label())))?;
        }
    }
    write_plot_script(dir)?;
    write_reports(dir, &records)
}
