//! Least-squares fit of a user profile to observed VO2max.
//!
//! The fitted vector is `(alpha, beta, k_f, k_g, b_0)`; `lambda`, `mu` and
//! `delta` are held fixed because a sparse performance series cannot pin all
//! nine parameters. Observed values are divided by `perf_scale` before
//! comparison, so `b_0` absorbs the offset of the linear map between model
//! performance and VO2max. The objective is minimized with Nelder-Mead from
//! several starts; points outside the box are evaluated at the nearest box
//! point plus a quadratic penalty.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{performance, update_state, HealthState, SkillStage, UserProfile};
use crate::error::{Error, Result};

use super::series::{IntensitySeries, PerformanceSeries};

pub const MIN_OBSERVATIONS: usize = 10;
const DIM: usize = 5;
const PENALTY: f64 = 1e6;

/// Box for `(alpha, beta, k_f, k_g, b_0)`.
pub const LOWER: [f64; DIM] = [0.01, 0.01, 1e-4, 1e-4, 1e-3];
pub const UPPER: [f64; DIM] = [0.999, 0.999, 5.0, 5.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateOptions {
    pub starts: usize,
    /// Objective evaluations allowed per start.
    pub max_evals: usize,
    /// Stop when the simplex's objective values and vertices are this close.
    pub tolerance: f64,
    /// Divisor applied to observations; defaults to their mean.
    pub perf_scale: Option<f64>,
    pub lambda: f64,
    pub mu: f64,
    pub delta: f64,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            max_evals: 10_000,
            tolerance: 1e-8,
            perf_scale: None,
            lambda: 1.0,
            mu: 1.5,
            delta: 0.9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    /// Fitted profile; `m` and `l` keep their defaults.
    pub profile: UserProfile,
    pub b0: f64,
    pub perf_scale: f64,
    pub rss: f64,
    /// Objective evaluations summed over all starts.
    pub evaluations: usize,
    pub converged: bool,
    /// Objective at each start's initial point.
    pub start_rss: Vec<f64>,
}

/// Performance after each day's intensity, at the requested day indices.
pub fn simulate_performance(
    daily: &[f64],
    observe: &[usize],
    profile: &UserProfile,
    b0: f64,
    stage: SkillStage,
) -> Result<Vec<f64>> {
    let mut state = HealthState {
        e: 0.0,
        b: b0,
        f: 0.0,
        g: 0.0,
    };
    let mut perf = Vec::with_capacity(daily.len());
    for &e in daily {
        state = update_state(&state, e, profile)?;
        perf.push(performance(&state, profile, stage));
    }
    observe
        .iter()
        .map(|&i| {
            perf.get(i)
                .copied()
                .ok_or_else(|| Error::Data(format!("observation day {i} beyond {} simulated days", daily.len())))
        })
        .collect()
}

struct Problem<'a> {
    daily: &'a [f64],
    observe: Vec<usize>,
    target: Vec<f64>,
    stage: SkillStage,
    base: UserProfile,
}

impl Problem<'_> {
    fn profile(&self, x: &[f64; DIM]) -> UserProfile {
        UserProfile {
            alpha: x[0],
            beta: x[1],
            k_f: x[2],
            k_g: x[3],
            ..self.base
        }
    }

    fn rss(&self, x: &[f64; DIM]) -> f64 {
        match simulate_performance(self.daily, &self.observe, &self.profile(x), x[4], self.stage) {
            Ok(p) => p.iter().zip(&self.target).map(|(a, b)| (a - b).powi(2)).sum(),
            Err(_) => f64::INFINITY,
        }
    }

    fn objective(&self, x: &[f64; DIM]) -> f64 {
        let mut clamped = *x;
        let mut dist2 = 0.0;
        for i in 0..DIM {
            clamped[i] = x[i].clamp(LOWER[i], UPPER[i]);
            dist2 += (x[i] - clamped[i]).powi(2);
        }
        let value = self.rss(&clamped) + PENALTY * dist2;
        if value.is_nan() {
            f64::INFINITY
        } else {
            value
        }
    }
}

struct Minimum {
    x: [f64; DIM],
    value: f64,
    evaluations: usize,
    converged: bool,
}

/// Nelder-Mead with standard coefficients. Stops when the spread of
/// objective values is below `tol` and every vertex lies within `sqrt(tol)`
/// of the best one, or after `max_evals` evaluations.
fn nelder_mead(f: impl Fn(&[f64; DIM]) -> f64, start: [f64; DIM], step: [f64; DIM], tol: f64, max_evals: usize) -> Minimum {
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64; DIM]| {
        evals.set(evals.get() + 1);
        f(x)
    };
    let mut simplex: Vec<([f64; DIM], f64)> = Vec::with_capacity(DIM + 1);
    simplex.push((start, eval(&start)));
    for i in 0..DIM {
        let mut x = start;
        x[i] += step[i];
        let v = eval(&x);
        simplex.push((x, v));
    }
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[DIM].1);
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= tol && diameter <= tol.sqrt() {
            converged = true;
            break;
        }
        if evals.get() >= max_evals {
            break;
        }
        let mut centroid = [0.0; DIM];
        for (x, _) in &simplex[..DIM] {
            for i in 0..DIM {
                centroid[i] += x[i] / DIM as f64;
            }
        }
        let toward = |t: f64| {
            let mut p = [0.0; DIM];
            for i in 0..DIM {
                p[i] = centroid[i] + t * (simplex[DIM].0[i] - centroid[i]);
            }
            p
        };
        let reflected = toward(-1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = toward(-2.0);
            let fe = eval(&expanded);
            simplex[DIM] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[DIM - 1].1 {
            simplex[DIM] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[DIM].1 { toward(-0.5) } else { toward(0.5) };
            let fc = eval(&contracted);
            if fc < fr.min(simplex[DIM].1) {
                simplex[DIM] = (contracted, fc);
            } else {
                let best_x = simplex[0].0;
                for vertex in simplex.iter_mut().skip(1) {
                    for i in 0..DIM {
                        vertex.0[i] = best_x[i] + 0.5 * (vertex.0[i] - best_x[i]);
                    }
                    vertex.1 = eval(&vertex.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Minimum {
        x: simplex[0].0,
        value: simplex[0].1,
        evaluations: evals.get(),
        converged,
    }
}

/// Fits `(alpha, beta, k_f, k_g, b_0)` to the observations that fall within
/// the intensity series' date range. Rest days are zero-filled.
pub fn estimate_profile(
    intensity: &IntensitySeries,
    perf: &PerformanceSeries,
    stage: SkillStage,
    opts: &EstimateOptions,
) -> Result<EstimationResult> {
    if opts.starts == 0 || opts.max_evals < DIM + 1 || !(opts.tolerance > 0.0) {
        return Err(Error::Config("estimation needs >= 1 start, >= 6 evaluations and a positive tolerance".into()));
    }
    let (Some(&(first, _)), Some(&(last, _))) = (intensity.samples.first(), intensity.samples.last()) else {
        return Err(Error::Data(format!("intensity series {} is empty", intensity.user_id)));
    };
    let daily: Vec<f64> = intensity.daily_normalized(last)?.into_iter().map(|(_, v)| v).collect();
    let overlapping: Vec<(usize, f64)> = perf
        .samples
        .iter()
        .filter(|(d, _)| *d >= first && *d <= last)
        .map(|(d, v)| ((*d - first).num_days() as usize, *v))
        .collect();
    if overlapping.len() < MIN_OBSERVATIONS {
        return Err(Error::Data(format!(
            "{} performance observations overlap the intensity dates of {}; need at least {MIN_OBSERVATIONS}",
            overlapping.len(),
            intensity.user_id
        )));
    }
    let perf_scale = opts
        .perf_scale
        .unwrap_or_else(|| overlapping.iter().map(|o| o.1).sum::<f64>() / overlapping.len() as f64);
    if !(perf_scale.is_finite() && perf_scale > 0.0) {
        return Err(Error::domain(format!("performance scale {perf_scale} must be positive")));
    }
    let base = UserProfile {
        lambda: opts.lambda,
        mu: opts.mu,
        delta: opts.delta,
        ..UserProfile::default()
    };
    base.validate()?;
    let problem = Problem {
        daily: &daily,
        observe: overlapping.iter().map(|o| o.0).collect(),
        target: overlapping.iter().map(|o| o.1 / perf_scale).collect(),
        stage,
        base,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let step: [f64; DIM] = std::array::from_fn(|i| 0.1 * (UPPER[i] - LOWER[i]).min(1.0));
    let mut best: Option<Minimum> = None;
    let mut start_rss = Vec::with_capacity(opts.starts);
    let mut evaluations = 0;
    for s in 0..opts.starts {
        let start: [f64; DIM] = if s == 0 {
            [0.8, 0.5, 0.1, 0.1, 1.0]
        } else {
            std::array::from_fn(|i| LOWER[i] + (UPPER[i].min(2.0) - LOWER[i]) * rng.random::<f64>())
        };
        start_rss.push(problem.objective(&start));
        let f = |x: &[f64; DIM]| problem.objective(x);
        let mut run = nelder_mead(f, start, step, opts.tolerance, opts.max_evals);
        // One restart from the optimum guards against a collapsed simplex.
        if run.evaluations < opts.max_evals {
            let again = nelder_mead(f, run.x, step, opts.tolerance, opts.max_evals - run.evaluations);
            run = Minimum {
                evaluations: run.evaluations + again.evaluations,
                converged: again.converged,
                ..if again.value <= run.value { again } else { run }
            };
        }
        evaluations += run.evaluations;
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let x: [f64; DIM] = std::array::from_fn(|i| best.x[i].clamp(LOWER[i], UPPER[i]));
    if !best.converged {
        log::warn!("profile fit for {} hit the evaluation cap", intensity.user_id);
    }
    Ok(EstimationResult {
        profile: problem.profile(&x),
        b0: x[4],
        perf_scale,
        rss: problem.rss(&x),
        evaluations,
        converged: best.converged,
        start_rss,
    })
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;

    use super::*;
    use crate::data::series::{normalize, IntensityUnit};

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let target = [0.3, 0.7, 1.1, 0.2, 2.0];
        let f = |x: &[f64; DIM]| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let m = nelder_mead(f, [0.0; DIM], [0.5; DIM], 1e-12, 20_000);
        assert!(m.converged);
        for (a, b) in m.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn short_series_is_rejected() {
        let day = |i: i64| NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() + chrono::Duration::days(i);
        let s = IntensitySeries::new("u", IntensityUnit::Trimp, (0..30).map(|i| (day(i), (i % 5) as f64)).collect()).unwrap();
        let s = normalize(&s).unwrap();
        let p = PerformanceSeries::new("u", (0..9).map(|i| (day(i * 3), 40.0)).collect()).unwrap();
        let err = estimate_profile(&s, &p, SkillStage::Acquisition, &EstimateOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
    }

    #[test]
    fn penalty_grows_outside_box() {
        let daily = [0.5; 20];
        let p = Problem {
            daily: &daily,
            observe: vec![5, 10],
            target: vec![1.0, 1.0],
            stage: SkillStage::Acquisition,
            base: UserProfile::default(),
        };
        let inside = [0.9, 0.5, 0.3, 0.2, 1.0];
        let outside = [1.2, 0.5, 0.3, 0.2, 1.0];
        assert!(p.objective(&outside) > p.objective(&inside) + 1e4);
    }
}
