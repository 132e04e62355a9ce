//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export returns a JSON string. The `*_json` functions hold the logic
//! and are plain Rust so they can be tested natively.

use fitgoal::agents::evaluate;
use fitgoal::data::{trimp, Session, Sex};
use fitgoal::dynamics::performance;
use fitgoal::env::rollout;
use fitgoal::harness::Strategy;
use fitgoal::{BehaviorModel, EnvId, EpisodeConfig, SkillStage, UserProfile};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Trajectory {
    day: Vec<usize>,
    intensity: Vec<f64>,
    base: Vec<f64>,
    fitness: Vec<f64>,
    fatigue: Vec<f64>,
    performance: Vec<f64>,
    reward: Vec<f64>,
    total: f64,
}

#[derive(Serialize)]
struct StrategyMean {
    strategy: String,
    mean: f64,
    sd: f64,
}

fn config(env: &str, stage: &str, rho: f64, sigma: f64, seed: u32) -> Result<EpisodeConfig, String> {
    let env: EnvId = env.parse().map_err(|e: fitgoal::Error| e.to_string())?;
    let stage: SkillStage = stage.parse().map_err(|e: fitgoal::Error| e.to_string())?;
    let behavior = BehaviorModel {
        rho,
        sigma,
        ..BehaviorModel::default()
    };
    EpisodeConfig::new(env, stage, UserProfile::default(), behavior, u64::from(seed)).map_err(|e| e.to_string())
}

fn strategy(name: &str) -> Result<Strategy, String> {
    match name.parse::<Strategy>() {
        Ok(Strategy::Adaptive) => Err("the demo has no trained agent; pick a fixed strategy".into()),
        Ok(s) => Ok(s),
        Err(e) => Err(e.to_string()),
    }
}

/// One 84-day episode under a fixed strategy.
pub fn simulate_json(env: &str, stage: &str, strategy_name: &str, rho: f64, sigma: f64, seed: u32) -> Result<String, String> {
    let cfg = config(env, stage, rho, sigma, seed)?;
    let mut policy = strategy(strategy_name)?.fixed_policy().expect("fixed strategies have a policy");
    let rec = rollout(&mut policy, &cfg).map_err(|e| e.to_string())?;
    // states entering each day
    let states: Vec<_> = rec.epochs.iter().map(|e| e.state).collect();
    let t = Trajectory {
        day: rec.epochs.iter().map(|e| e.day).collect(),
        intensity: rec.epochs.iter().map(|e| e.intensity).collect(),
        base: states.iter().map(|s| s.b).collect(),
        fitness: states.iter().map(|s| s.f).collect(),
        fatigue: states.iter().map(|s| s.g).collect(),
        performance: states.iter().map(|s| performance(s, &cfg.profile, cfg.stage)).collect(),
        reward: rec.epochs.iter().map(|e| e.reward).collect(),
        total: rec.total_reward,
    };
    serde_json::to_string(&t).map_err(|e| e.to_string())
}

/// Mean and sd of total reward for every fixed strategy on paired seeds.
pub fn compare_json(env: &str, stage: &str, rho: f64, sigma: f64, reps: u32, seed: u32) -> Result<String, String> {
    let cfg = config(env, stage, rho, sigma, seed)?;
    let reps = reps.clamp(1, 500) as usize;
    let rows = Strategy::ALL
        .into_iter()
        .filter_map(|s| s.fixed_policy().map(|p| (s, p)))
        .map(|(s, p)| {
            let eps = evaluate(&p, std::slice::from_ref(&cfg), reps, u64::from(seed), 1).map_err(|e| e.to_string())?;
            let v: Vec<f64> = eps[0].iter().map(|e| e.total_reward).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64;
            Ok(StrategyMean {
                strategy: s.to_string(),
                mean,
                sd: var.sqrt(),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

/// Training impulse of one heart-rate session.
pub fn trimp_json(duration_min: f64, avg_hr: f64, rest_hr: f64, max_hr: f64, sex: &str) -> Result<String, String> {
    let sex: Sex = sex.parse().map_err(|e: fitgoal::Error| e.to_string())?;
    let s = Session {
        duration_min,
        avg_hr,
        rest_hr,
        max_hr,
        sex,
    };
    let v = trimp(&s).map_err(|e| e.to_string())?;
    Ok(format!("{{\"trimp\":{v}}}"))
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate(env: &str, stage: &str, strategy: &str, rho: f64, sigma: f64, seed: u32) -> Result<String, JsValue> {
    js(simulate_json(env, stage, strategy, rho, sigma, seed))
}

#[wasm_bindgen]
pub fn compare(env: &str, stage: &str, rho: f64, sigma: f64, reps: u32, seed: u32) -> Result<String, JsValue> {
    js(compare_json(env, stage, rho, sigma, reps, seed))
}

#[wasm_bindgen(js_name = trainingImpulse)]
pub fn training_impulse(duration_min: f64, avg_hr: f64, rest_hr: f64, max_hr: f64, sex: &str) -> Result<String, JsValue> {
    js(trimp_json(duration_min, avg_hr, rest_hr, max_hr, sex))
}
