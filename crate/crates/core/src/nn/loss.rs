use crate::error::{Error, Result};

use super::{Gradients, NetParams, ObservationWindow};

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Shannon entropy of the softmax distribution over `logits`.
pub fn entropy(logits: &[f64]) -> f64 {
    let logp = log_softmax(logits);
    -logp.iter().map(|lp| lp.exp() * lp).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    /// Weight of the entropy bonus.
    pub entropy: f64,
    /// Weight of the squared value error.
    pub value: f64,
}

impl Default for LossCoefficients {
    fn default() -> Self {
        Self {
            entropy: 0.01,
            value: 0.5,
        }
    }
}

/// One step of a rollout segment: observation, sampled action index and the
/// n-step return target.
#[derive(Debug, Clone)]
pub struct SegmentSample<'a> {
    pub window: &'a ObservationWindow,
    pub action: usize,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

/// Gradient of `sum_t [ -log pi(a_t|s_t) A_t - c_e H(pi(.|s_t)) + c_v (R_t - V(s_t))^2 ]`
/// with the advantage `A_t = R_t - V(s_t)` held constant in the policy term.
pub fn actor_critic_backward(
    params: &NetParams,
    segment: &[SegmentSample<'_>],
    coeffs: LossCoefficients,
) -> Result<(Gradients, LossStats)> {
    let mut grads = Gradients::zeros_like(params);
    let mut stats = LossStats::default();
    for s in segment {
        let cache = params.forward_cached(s.window)?;
        let logits = &cache.output.logits;
        if s.action >= logits.len() {
            return Err(Error::Shape(format!("action {} outside {} logits", s.action, logits.len())));
        }
        let value = cache.output.value;
        let advantage = s.target - value;
        let logp = log_softmax(logits);
        let probs: Vec<f64> = logp.iter().map(|lp| lp.exp()).collect();
        let h = -probs.iter().zip(&logp).map(|(p, lp)| p * lp).sum::<f64>();

        let policy_loss = -logp[s.action] * advantage;
        let value_loss = coeffs.value * advantage * advantage;
        let loss = policy_loss - coeffs.entropy * h + value_loss;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite loss {loss} (value {value}, target {}, entropy {h})",
                s.target
            )));
        }
        stats.loss += loss;
        stats.policy_loss += policy_loss;
        stats.value_loss += value_loss;
        stats.entropy += h;

        let d_logits: Vec<f64> = probs
            .iter()
            .zip(&logp)
            .enumerate()
            .map(|(j, (p, lp))| {
                let onehot = if j == s.action { 1.0 } else { 0.0 };
                -advantage * (onehot - p) + coeffs.entropy * p * (lp + h)
            })
            .collect();
        let d_value = -2.0 * coeffs.value * advantage;
        params.backward(&cache, &d_logits, d_value, &mut grads)?;
    }
    Ok((grads, stats))
}

/// Regression target for one action-value estimate.
#[derive(Debug, Clone)]
pub struct QSample<'a> {
    pub window: &'a ObservationWindow,
    pub action: usize,
    pub target: f64,
}

/// Gradient of the mean Huber loss between `Q(s, a)` (read from the policy
/// head) and the target; returns the mean loss.
pub fn q_backward(params: &NetParams, batch: &[QSample<'_>], huber_delta: f64) -> Result<(Gradients, f64)> {
    let mut grads = Gradients::zeros_like(params);
    let mut total = 0.0;
    let n = batch.len().max(1) as f64;
    for s in batch {
        let cache = params.forward_cached(s.window)?;
        let q = cache.output.logits[s.action];
        let err = q - s.target;
        let (loss, d_q) = if err.abs() <= huber_delta {
            (0.5 * err * err, err)
        } else {
            (huber_delta * (err.abs() - 0.5 * huber_delta), huber_delta * err.signum())
        };
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("non-finite TD loss (q {q}, target {})", s.target)));
        }
        total += loss;
        let mut d_logits = vec![0.0; cache.output.logits.len()];
        d_logits[s.action] = d_q / n;
        params.backward(&cache, &d_logits, 0.0, &mut grads)?;
    }
    Ok((grads, total / n))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::nn::{Architecture, NetSpec};

    proptest! {
        #[test]
        fn softmax_is_a_distribution(logits in proptest::collection::vec(-500.0..500.0f64, 1..20)) {
            let p = softmax(&logits);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn shift_invariance(logits in proptest::collection::vec(-50.0..50.0f64, 10), shift in -1e3..1e3f64) {
            let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
            prop_assert_eq!(crate::nn::argmax(&logits), crate::nn::argmax(&shifted));
        }
    }

    fn window(seed: u64) -> ObservationWindow {
        let data: Vec<f64> = (0..42).map(|k| ((k as f64 + seed as f64) * 0.77).sin().abs()).collect();
        ObservationWindow::from_rows(7, 6, data).unwrap()
    }

    #[test]
    fn zero_advantage_gives_zero_gradient() {
        let spec = NetSpec::new(Architecture::Hybrid { hidden: 4, dense: 4 });
        let net = NetParams::init(spec, 2);
        let w = window(1);
        let v = net.forward(&w).unwrap().value;
        let seg = [SegmentSample { window: &w, action: 3, target: v }];
        let coeffs = LossCoefficients { entropy: 0.0, value: 0.0 };
        let (g, _) = actor_critic_backward(&net, &seg, coeffs).unwrap();
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn entropy_stationary_at_uniform_policy() {
        let spec = NetSpec::new(Architecture::Hybrid { hidden: 3, dense: 3 });
        let mut net = NetParams::init(spec, 5);
        // Zero the policy head so every window maps to uniform logits.
        for name in ["actor.w", "actor.b"] {
            let r = spec.layout().get(name).unwrap().range();
            net.as_mut_slice()[r].iter_mut().for_each(|v| *v = 0.0);
        }
        let w = window(3);
        let v = net.forward(&w).unwrap().value;
        let seg = [SegmentSample { window: &w, action: 0, target: v }];
        let (g, stats) = actor_critic_backward(&net, &seg, LossCoefficients { entropy: 1.0, value: 0.0 }).unwrap();
        assert!((stats.entropy - 10f64.ln()).abs() < 1e-12);
        assert!(g.as_slice().iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let spec = NetSpec::new(Architecture::Hybrid { hidden: 2, dense: 2 });
        let net = NetParams::init(spec, 2);
        let w = window(0);
        let seg = [SegmentSample { window: &w, action: 0, target: f64::NAN }];
        assert!(matches!(
            actor_critic_backward(&net, &seg, LossCoefficients::default()),
            Err(Error::Divergence(_))
        ));
    }
}
