//! Finite-difference gradient checking shared by the integration tests.
#![allow(dead_code)]

use fitgoal::nn::{
    actor_critic_backward, log_softmax, Architecture, LossCoefficients, NetParams, NetSpec,
    ObservationWindow, QSample, SegmentSample,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_TOL: f64 = 1e-7;

pub fn random_window(rng: &mut ChaCha8Rng, spec: &NetSpec) -> ObservationWindow {
    let data = (0..spec.window * spec.input).map(|_| rng.random_range(-1.0..1.5)).collect();
    ObservationWindow::from_rows(spec.window, spec.input, data).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, spec: NetSpec) -> NetParams {
    let n = spec.param_count();
    NetParams::from_vec(spec, (0..n).map(|_| rng.random_range(-0.8..0.8)).collect()).unwrap()
}

/// Actor-critic loss with the advantage frozen at the values computed from
/// `frozen`, which is what the analytic gradient differentiates.
pub fn ac_loss(params: &NetParams, frozen: &[f64], samples: &[SegmentSample<'_>], c: LossCoefficients) -> f64 {
    samples
        .iter()
        .zip(frozen)
        .map(|(s, &adv)| {
            let out = params.forward(s.window).unwrap();
            let logp = log_softmax(&out.logits);
            let h = -logp.iter().map(|lp| lp.exp() * lp).sum::<f64>();
            let err = s.target - out.value;
            -logp[s.action] * adv - c.entropy * h + c.value * err * err
        })
        .sum()
}

pub fn q_loss(params: &NetParams, batch: &[QSample<'_>], delta: f64) -> f64 {
    let n = batch.len() as f64;
    batch
        .iter()
        .map(|s| {
            let err = params.forward(s.window).unwrap().logits[s.action] - s.target;
            if err.abs() <= delta {
                0.5 * err * err
            } else {
                delta * (err.abs() - 0.5 * delta)
            }
        })
        .sum::<f64>()
        / n
}

pub fn check(label: &str, analytic: &[f64], mut loss_at: impl FnMut(&[f64]) -> f64, theta: &[f64]) -> usize {
    let mut failures = 0;
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + STEP;
        let up = loss_at(&probe);
        probe[i] = theta[i] - STEP;
        let down = loss_at(&probe);
        probe[i] = theta[i];
        let numeric = (up - down) / (2.0 * STEP);
        let diff = (numeric - analytic[i]).abs();
        let scale = numeric.abs().max(analytic[i].abs());
        if diff > ABS_TOL && diff > REL_TOL * scale {
            failures += 1;
            eprintln!("{label}: param {i} analytic {} numeric {numeric}", analytic[i]);
        }
    }
    failures
}

/// Checks every parameter of a random `arch` network on `segments` random
/// trajectory segments. Returns (parameter checks, failures).
pub fn actor_critic_case(arch: Architecture, window: usize, segments: u64) -> (usize, usize) {
    let spec = NetSpec::new(arch).with_window(window);
    let coeffs = LossCoefficients::default();
    let mut failures = 0;
    let mut checked = 0;
    for seed in 0..segments {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = random_params(&mut rng, spec);
        let len = rng.random_range(1..=4);
        let windows: Vec<_> = (0..len).map(|_| random_window(&mut rng, &spec)).collect();
        let samples: Vec<SegmentSample<'_>> = windows
            .iter()
            .map(|w| SegmentSample {
                window: w,
                action: rng.random_range(0..spec.actions),
                target: rng.random_range(-2.0..2.0),
            })
            .collect();
        let frozen: Vec<f64> = samples
            .iter()
            .map(|s| s.target - params.forward(s.window).unwrap().value)
            .collect();
        let (grads, _) = actor_critic_backward(&params, &samples, coeffs).unwrap();
        checked += params.len();
        failures += check(
            &format!("{} seed {seed}", arch.label()),
            grads.as_slice(),
            |theta| ac_loss(&NetParams::from_vec(spec, theta.to_vec()).unwrap(), &frozen, &samples, coeffs),
            params.as_slice(),
        );
    }
    (checked, failures)
}
