//! Round-trip recovery of fitted profile parameters from generated data.

use chrono::NaiveDate;
use fitgoal::data::{
    estimate_profile, normalize, simulate_performance, EstimateOptions, IntensitySeries, IntensityUnit,
    PerformanceSeries,
};
use fitgoal::{SkillStage, UserProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const TRUE_ALPHA: f64 = 0.9;
const TRUE_BETA: f64 = 0.5;
const TRUE_KF: f64 = 0.3;
const TRUE_KG: f64 = 0.2;
const TRUE_B0: f64 = 1.0;

fn day(i: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 9, 1).unwrap() + chrono::Duration::days(i as i64)
}

/// 84 days of training load and a performance reading every third day.
fn dataset(seed: u64, noise: f64, stage: SkillStage) -> (IntensitySeries, PerformanceSeries) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<(NaiveDate, f64)> = (0..84).map(|i| (day(i), rng.random_range(0.0..120.0))).collect();
    let series = normalize(&IntensitySeries::new("synthetic", IntensityUnit::Trimp, raw).unwrap()).unwrap();
    let daily = series.normalized.clone().unwrap();
    let truth = UserProfile {
        alpha: TRUE_ALPHA,
        beta: TRUE_BETA,
        lambda: 1.0,
        mu: 1.5,
        delta: 0.9,
        k_f: TRUE_KF,
        k_g: TRUE_KG,
        ..UserProfile::default()
    };
    let observe: Vec<usize> = (2..84).step_by(3).collect();
    let clean = simulate_performance(&daily, &observe, &truth, TRUE_B0, stage).unwrap();
    let normal = Normal::new(0.0, noise.max(1e-300)).unwrap();
    let samples = observe
        .iter()
        .zip(clean)
        .map(|(&i, p)| (day(i), p + if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 }))
        .collect();
    (series, PerformanceSeries::new("synthetic", samples).unwrap())
}

fn opts(seed: u64) -> EstimateOptions {
    EstimateOptions {
        perf_scale: Some(1.0),
        seed,
        ..EstimateOptions::default()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn noiseless_recovery() {
    for stage in SkillStage::ALL {
        let (intensity, perf) = dataset(7, 0.0, stage);
        let fit = estimate_profile(&intensity, &perf, stage, &opts(1)).unwrap();
        let p = fit.profile;
        assert!(fit.rss < 1e-6, "{stage}: rss {}", fit.rss);
        assert!((p.alpha - TRUE_ALPHA).abs() <= 0.02, "{stage}: alpha {}", p.alpha);
        assert!((p.beta - TRUE_BETA).abs() <= 0.02, "{stage}: beta {}", p.beta);
        assert!((p.k_f - TRUE_KF).abs() <= 0.02, "{stage}: k_f {}", p.k_f);
        assert!((p.k_g - TRUE_KG).abs() <= 0.02, "{stage}: k_g {}", p.k_g);
        p.validate().unwrap();
        for start in &fit.start_rss {
            assert!(fit.rss <= *start);
        }
    }
}

#[test]
fn noisy_recovery_median_over_seeds() {
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    for seed in 0..20 {
        let (intensity, perf) = dataset(100 + seed, 0.05, SkillStage::Acquisition);
        let fit = estimate_profile(&intensity, &perf, SkillStage::Acquisition, &opts(seed)).unwrap();
        alphas.push(fit.profile.alpha);
        betas.push(fit.profile.beta);
    }
    let (a, b) = (median(alphas), median(betas));
    assert!((a - TRUE_ALPHA).abs() <= 0.1, "median alpha {a}");
    assert!((b - TRUE_BETA).abs() <= 0.1, "median beta {b}");
}

#[test]
fn default_scale_is_mean_observation() {
    let (intensity, perf) = dataset(3, 0.0, SkillStage::Acquisition);
    let scaled = PerformanceSeries::new("s", perf.samples.iter().map(|(d, v)| (*d, 40.0 * v)).collect()).unwrap();
    let fit = estimate_profile(&intensity, &scaled, SkillStage::Acquisition, &EstimateOptions::default()).unwrap();
    let mean = scaled.samples.iter().map(|s| s.1).sum::<f64>() / scaled.samples.len() as f64;
    assert!((fit.perf_scale - mean).abs() < 1e-9);
}
