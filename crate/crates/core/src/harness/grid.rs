//! The experiment grid. Every (group, env, stage) cell trains the adaptive
//! agent and evaluates all configured strategies on the same seeds.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::agents::{evaluate, mix_seed, LearningCurve, NetPolicy, TrainOutcome};
use crate::data::{
    estimate_profile, load_sessions, load_srpe, load_vo2max, normalize, synth_g1, trimp_series, user_id_from_path,
    EstimationResult, IntensitySeries,
};
use crate::dynamics::{SkillStage, UserProfile};
use crate::env::{rollout, BehaviorModel, EnvId, EpisodeConfig};
use crate::error::{Error, Result};
use crate::nn::NetParams;

use super::config::{Config, Group, Strategy};

pub const RESULTS_HEADER: [&str; 7] = ["group", "env", "stage", "strategy", "rep", "seed", "total_reward"];

/// Seed stream reserved for agent training inside a cell.
const TRAIN_STREAM: u64 = 0x7EA1;

/// One evaluated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub group: Group,
    pub env: EnvId,
    pub stage: SkillStage,
    pub strategy: Strategy,
    pub rep: usize,
    pub seed: u64,
    pub total_reward: f64,
}

impl RunRecord {
    pub fn cell(&self) -> CellKey {
        CellKey {
            group: self.group,
            env: self.env,
            stage: self.stage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub group: Group,
    pub env: EnvId,
    pub stage: SkillStage,
}

impl CellKey {
    /// File-name friendly label, e.g. `G1_E2_acquisition`.
    pub fn label(&self) -> String {
        format!("{}_{}_{}", self.group, self.env, self.stage)
    }

    /// Evaluation base seed; depends only on the cell, not on which other
    /// cells are selected.
    pub fn seed(&self, base: u64) -> u64 {
        mix_seed(base, ((self.group as u64) << 16) | ((self.env as u64) << 8) | self.stage as u64)
    }

    pub fn train_seed(&self, base: u64) -> u64 {
        mix_seed(self.seed(base), TRAIN_STREAM)
    }
}

/// The simulated user standing in for a data group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupUser {
    pub profile: UserProfile,
    pub behavior: BehaviorModel,
    /// Present for groups whose profile is fitted from data.
    pub fit: Option<EstimationResult>,
}

fn mean_normalized(series: &IntensitySeries) -> Result<f64> {
    let n = normalize(series)?;
    let v = n.normalized.expect("normalize fills values");
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

fn with_baseline(behavior: BehaviorModel, baseline: f64) -> BehaviorModel {
    BehaviorModel {
        baseline: baseline.clamp(1e-3, 1.0),
        ..behavior
    }
}

/// Resolves a group to a user. The intrinsic intensity baseline is the mean
/// normalized intensity of the group's data; G3 additionally replaces the
/// dynamics parameters with ones fitted to its VO2max readings.
pub fn resolve_group(cfg: &Config, group: Group, stage: SkillStage) -> Result<GroupUser> {
    let x = &cfg.experiment;
    match group {
        Group::G1 => {
            let users = synth_g1(x.g1_users, x.seed)?;
            let means = users.iter().map(|u| mean_normalized(&u.steps)).collect::<Result<Vec<_>>>()?;
            let baseline = means.iter().sum::<f64>() / means.len() as f64;
            Ok(GroupUser {
                profile: cfg.profile,
                behavior: with_baseline(cfg.behavior, baseline),
                fit: None,
            })
        }
        Group::G2 => {
            let path = x.srpe.as_ref().ok_or_else(|| Error::Config("group G2 needs an srpe path".into()))?;
            let log = load_srpe(path)?;
            Ok(GroupUser {
                profile: cfg.profile,
                behavior: with_baseline(cfg.behavior, mean_normalized(&log.series)?),
                fit: None,
            })
        }
        Group::G3 => {
            let (Some(sessions), Some(vo2)) = (&x.sessions, &x.vo2max) else {
                return Err(Error::Config("group G3 needs sessions and vo2max paths".into()));
            };
            let load = trimp_series(user_id_from_path(sessions), &load_sessions(sessions)?)?;
            let normalized = normalize(&load)?;
            let fit = estimate_profile(&normalized, &load_vo2max(vo2)?, stage, &x.estimate)?;
            Ok(GroupUser {
                profile: UserProfile {
                    m: cfg.profile.m,
                    l: cfg.profile.l,
                    ..fit.profile
                },
                behavior: with_baseline(cfg.behavior, mean_normalized(&load)?),
                fit: Some(fit),
            })
        }
    }
}

/// Outcome of one grid cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub key: CellKey,
    pub template: EpisodeConfig,
    pub records: Vec<RunRecord>,
    /// Learning curve of the (first) trained agent.
    pub curve: Option<LearningCurve>,
    pub params: Option<NetParams>,
    /// Why the adaptive agent could not be trained; its records are absent.
    pub failure: Option<String>,
    pub train_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct GridOutput {
    pub cells: Vec<CellOutcome>,
}

impl GridOutput {
    pub fn records(&self) -> Vec<RunRecord> {
        self.cells.iter().flat_map(|c| c.records.iter().cloned()).collect()
    }
}

/// Trains the configured agent on `template`; divergence is an error.
pub fn train_agent(cfg: &Config, template: &EpisodeConfig, seed: u64) -> Result<TrainOutcome> {
    cfg.agent
        .algorithm
        .train(template, &cfg.train_config(seed), &cfg.agent.dqn, cfg.agent.window)?
        .into_result()
}

/// Episode templates for every selected cell, in selection order.
pub fn grid_cells(cfg: &Config) -> Result<Vec<(CellKey, EpisodeConfig)>> {
    let mut users = std::collections::HashMap::new();
    for &group in &cfg.experiment.groups {
        for &stage in &cfg.env.stages {
            users.insert((group, stage), resolve_group(cfg, group, stage)?);
        }
    }
    let mut out = Vec::new();
    for &group in &cfg.experiment.groups {
        for &env in &cfg.env.envs {
            for &stage in &cfg.env.stages {
                let user = &users[&(group, stage)];
                let template = cfg.episode(env, stage, user.profile, user.behavior)?;
                out.push((CellKey { group, env, stage }, template));
            }
        }
    }
    Ok(out)
}

/// Evaluates the configured strategies in one cell. The adaptive strategy
/// uses `adaptive` greedily and is skipped when it is `None`.
pub fn evaluate_cell(cfg: &Config, key: CellKey, template: &EpisodeConfig, adaptive: Option<&NetParams>) -> Result<Vec<RunRecord>> {
    let x = &cfg.experiment;
    let base = key.seed(x.seed);
    let mut out = Vec::new();
    for &strategy in &x.strategies {
        let eps = match (strategy.fixed_policy(), adaptive) {
            (Some(policy), _) => evaluate(&policy, std::slice::from_ref(template), x.reps, base, 1)?,
            (None, Some(params)) => {
                evaluate(&NetPolicy::greedy("adaptive", params.clone()), std::slice::from_ref(template), x.reps, base, 1)?
            }
            (None, None) => continue,
        };
        out.extend(eps[0].iter().enumerate().map(|(rep, e)| RunRecord {
            group: key.group,
            env: key.env,
            stage: key.stage,
            strategy,
            rep,
            seed: e.seed,
            total_reward: e.total_reward,
        }));
    }
    Ok(out)
}

/// Trains and evaluates one cell. Training failures are recorded, not returned.
pub fn run_cell(cfg: &Config, key: CellKey, template: &EpisodeConfig) -> Result<CellOutcome> {
    let x = &cfg.experiment;
    let base = key.seed(x.seed);
    let mut out = CellOutcome {
        key,
        template: template.clone(),
        records: Vec::new(),
        curve: None,
        params: None,
        failure: None,
        train_seconds: 0.0,
    };
    let record = |strategy, rep: usize, ep: &crate::env::EpisodeRecord| RunRecord {
        group: key.group,
        env: key.env,
        stage: key.stage,
        strategy,
        rep,
        seed: ep.seed,
        total_reward: ep.total_reward,
    };
    for &strategy in &x.strategies {
        if let Some(policy) = strategy.fixed_policy() {
            let eps = evaluate(&policy, std::slice::from_ref(template), x.reps, base, 1)?;
            out.records.extend(eps[0].iter().enumerate().map(|(i, e)| record(strategy, i, e)));
            continue;
        }
        let started = Instant::now();
        let train_seed = key.train_seed(x.seed);
        let trained: Result<()> = (|| {
            if x.retrain_per_rep {
                for rep in 0..x.reps {
                    let t = train_agent(cfg, template, mix_seed(train_seed, rep as u64))?;
                    let mut policy = NetPolicy::greedy("adaptive", t.params.clone());
                    let ep = rollout(&mut policy, &template.with_seed(base.wrapping_add(rep as u64)))?;
                    out.records.push(record(strategy, rep, &ep));
                    if rep == 0 {
                        out.curve = Some(t.curve);
                        out.params = Some(t.params);
                    }
                }
            } else {
                let t = train_agent(cfg, template, train_seed)?;
                let policy = NetPolicy::greedy("adaptive", t.params.clone());
                let eps = evaluate(&policy, std::slice::from_ref(template), x.reps, base, 1)?;
                out.records.extend(eps[0].iter().enumerate().map(|(i, e)| record(strategy, i, e)));
                out.curve = Some(t.curve);
                out.params = Some(t.params);
            }
            Ok(())
        })();
        out.train_seconds += started.elapsed().as_secs_f64();
        if let Err(e) = trained {
            log::warn!("cell {} failed: {e}", key.label());
            out.records.retain(|r| r.strategy != strategy);
            out.failure = Some(e.to_string());
        }
    }
    Ok(out)
}

/// Runs every cell, `experiment.workers` at a time. Output order follows the
/// selection order, whatever the scheduling.
pub fn run_grid(cfg: &Config) -> Result<GridOutput> {
    let cells = grid_cells(cfg)?;
    let n = cells.len();
    let workers = cfg.experiment.workers.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<CellOutcome>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let (key, template) = &cells[i];
                log::info!("cell {} ({}/{n})", key.label(), i + 1);
                let r = run_cell(cfg, *key, template);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    let cells = slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every cell ran"))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridOutput { cells })
}

pub fn write_results_to(out: impl Write, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        w.write_record([
            r.group.to_string(),
            r.env.to_string(),
            r.stage.to_string(),
            r.strategy.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.total_reward.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<results>", e))?;
    Ok(())
}

pub fn write_results(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let path = path.as_ref();
    write_results_to(File::create(path).map_err(|e| Error::io(path, e))?, records)
}

pub fn read_results_from(input: impl Read, path: &Path) -> Result<Vec<RunRecord>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(parse_err(1, format!("expected header {}", RESULTS_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row?;
        if row.len() != RESULTS_HEADER.len() {
            return Err(parse_err(line, format!("expected {} fields, got {}", RESULTS_HEADER.len(), row.len())));
        }
        let field = |j: usize| &row[j];
        let wrap = |e: String| parse_err(line, e);
        let total_reward: f64 = field(6).parse().map_err(|e| wrap(format!("total_reward: {e}")))?;
        if !total_reward.is_finite() {
            return Err(wrap("total_reward is not finite".into()));
        }
        out.push(RunRecord {
            group: field(0).parse().map_err(|e: Error| wrap(e.to_string()))?,
            env: field(1).parse().map_err(|e: Error| wrap(e.to_string()))?,
            stage: field(2).parse().map_err(|e: Error| wrap(e.to_string()))?,
            strategy: field(3).parse().map_err(|e: Error| wrap(e.to_string()))?,
            rep: field(4).parse().map_err(|e| wrap(format!("rep: {e}")))?,
            seed: field(5).parse().map_err(|e| wrap(format!("seed: {e}")))?,
            total_reward,
        });
    }
    Ok(out)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    read_results_from(File::open(path).map_err(|e| Error::io(path, e))?, path)
}

/// `group,env,stage,reason` for cells whose agent failed to train.
pub fn write_failures(path: impl AsRef<Path>, cells: &[CellOutcome]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["group", "env", "stage", "reason"])?;
    for c in cells {
        if let Some(reason) = &c.failure {
            w.write_record([c.key.group.to_string(), c.key.env.to_string(), c.key.stage.to_string(), reason.clone()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
