use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Gradients, NetParams};

/// Scales `grads` in place so its global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm && norm.is_finite() {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Root-mean-square propagation with per-parameter accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
    accum: Vec<f64>,
    rejected: usize,
    applied: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApplyOutcome {
    Applied { norm: f64 },
    Rejected,
}

impl RmsProp {
    pub fn new(n_params: usize, learning_rate: f64, decay: f64, epsilon: f64, clip_norm: f64) -> Self {
        Self {
            learning_rate,
            decay,
            epsilon,
            clip_norm,
            accum: vec![0.0; n_params],
            rejected: 0,
            applied: 0,
        }
    }

    pub fn accumulators(&self) -> &[f64] {
        &self.accum
    }

    /// Updates that were dropped because the clipped gradient was not finite.
    pub fn rejected(&self) -> usize {
        self.rejected
    }

    pub fn applied(&self) -> usize {
        self.applied
    }

    pub fn apply(&mut self, params: &mut NetParams, mut grads: Gradients) -> Result<ApplyOutcome> {
        if grads.as_slice().len() != params.len() || self.accum.len() != params.len() {
            return Err(Error::Shape(format!(
                "{} gradients / {} accumulators for {} parameters",
                grads.as_slice().len(),
                self.accum.len(),
                params.len()
            )));
        }
        let norm = clip_global_norm(&mut grads, self.clip_norm);
        if !grads.is_finite() {
            self.rejected += 1;
            return Ok(ApplyOutcome::Rejected);
        }
        for ((p, a), g) in params.as_mut_slice().iter_mut().zip(&mut self.accum).zip(grads.as_slice()) {
            *a = self.decay * *a + (1.0 - self.decay) * g * g;
            *p -= self.learning_rate * g / (*a + self.epsilon).sqrt();
        }
        self.applied += 1;
        Ok(ApplyOutcome::Applied { norm })
    }
}

/// Shared parameters plus optimizer state for asynchronous workers.
///
/// Workers read a consistent snapshot, compute gradients against it (possibly
/// stale by the time they finish), and apply one batch of gradients atomically
/// under the store's lock.
#[derive(Debug)]
pub struct ParameterStore {
    inner: Mutex<(NetParams, RmsProp)>,
}

impl ParameterStore {
    pub fn new(params: NetParams, optimizer: RmsProp) -> Self {
        Self {
            inner: Mutex::new((params, optimizer)),
        }
    }

    pub fn snapshot(&self) -> NetParams {
        self.inner.lock().expect("parameter store poisoned").0.clone()
    }

    pub fn apply(&self, grads: Gradients) -> Result<ApplyOutcome> {
        let mut guard = self.inner.lock().expect("parameter store poisoned");
        let (params, opt) = &mut *guard;
        let outcome = opt.apply(params, grads)?;
        if !params.is_finite() {
            return Err(Error::Divergence("parameters became non-finite".into()));
        }
        Ok(outcome)
    }

    pub fn into_inner(self) -> (NetParams, RmsProp) {
        self.inner.into_inner().expect("parameter store poisoned")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, NetSpec};

    fn net() -> NetParams {
        NetParams::init(NetSpec::new(Architecture::Hybrid { hidden: 2, dense: 2 }), 1)
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = net();
        let before = p.clone();
        let mut opt = RmsProp::new(p.len(), 1e-3, 0.99, 1e-8, 40.0);
        opt.apply(&mut p, Gradients::zeros_like(&before)).unwrap();
        assert_eq!(p, before);
        assert!(opt.accumulators().iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn repeated_gradient_drifts_monotonically() {
        let mut p = net();
        let n = p.len();
        let dir: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -0.5 }).collect();
        let mut opt = RmsProp::new(n, 1e-2, 0.9, 1e-8, 40.0);
        let mut prev = p.as_slice().to_vec();
        for _ in 0..20 {
            opt.apply(&mut p, Gradients::from_vec(dir.clone())).unwrap();
            for ((now, before), d) in p.as_slice().iter().zip(&prev).zip(&dir) {
                // Descent moves against the gradient.
                assert!((now - before) * d < 0.0);
            }
            prev = p.as_slice().to_vec();
        }
    }

    #[test]
    fn norm_clip_scales_by_ratio() {
        let mut g = Gradients::from_vec(vec![240.0, 320.0]);
        let norm = clip_global_norm(&mut g, 40.0);
        assert_eq!(norm, 400.0);
        assert!((g.as_slice()[0] - 24.0).abs() < 1e-12);
        assert!((g.as_slice()[1] - 32.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = net();
        let before = p.clone();
        let mut opt = RmsProp::new(p.len(), 1e-3, 0.99, 1e-8, 40.0);
        let mut g = vec![0.0; p.len()];
        g[0] = f64::NAN;
        let out = opt.apply(&mut p, Gradients::from_vec(g)).unwrap();
        assert_eq!(out, ApplyOutcome::Rejected);
        assert_eq!(opt.rejected(), 1);
        assert_eq!(p, before);
    }
}
