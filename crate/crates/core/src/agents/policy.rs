use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::GoalAction;
use crate::env::{Frame, Policy};
use crate::error::Result;
use crate::nn::{argmax, softmax, NetParams, ObservationWindow};

/// How a network's outputs are turned into a goal.
#[derive(Debug, Clone)]
pub enum ActionMode {
    /// Highest logit (or Q value).
    Greedy,
    /// Draw from the softmax of the logits.
    Sample(ChaCha8Rng),
    /// Uniform action with probability `epsilon`, greedy otherwise.
    EpsilonGreedy { epsilon: f64, rng: ChaCha8Rng },
}

/// A policy backed by a trained network.
#[derive(Debug, Clone)]
pub struct NetPolicy {
    name: String,
    params: NetParams,
    mode: ActionMode,
}

impl NetPolicy {
    pub fn greedy(name: impl Into<String>, params: NetParams) -> Self {
        Self {
            name: name.into(),
            params,
            mode: ActionMode::Greedy,
        }
    }

    pub fn sampling(name: impl Into<String>, params: NetParams, seed: u64) -> Self {
        Self {
            name: name.into(),
            params,
            mode: ActionMode::Sample(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn epsilon_greedy(name: impl Into<String>, params: NetParams, epsilon: f64, seed: u64) -> Self {
        Self {
            name: name.into(),
            params,
            mode: ActionMode::EpsilonGreedy {
                epsilon,
                rng: ChaCha8Rng::seed_from_u64(seed),
            },
        }
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    pub fn window(&self, history: &[Frame]) -> ObservationWindow {
        ObservationWindow::from_history(history, self.params.spec().window)
    }
}

/// Draws an index from the softmax of `logits` with one uniform variate.
pub fn sample_index(logits: &[f64], rng: &mut impl Rng) -> usize {
    let probs = softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

impl Policy for NetPolicy {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn select_action(&mut self, history: &[Frame]) -> Result<GoalAction> {
        let window = self.window(history);
        let out = self.params.forward(&window)?;
        let index = match &mut self.mode {
            ActionMode::Greedy => argmax(&out.logits),
            ActionMode::Sample(rng) => sample_index(&out.logits, rng),
            ActionMode::EpsilonGreedy { epsilon, rng } => {
                if rng.random::<f64>() < *epsilon {
                    rng.random_range(0..out.logits.len())
                } else {
                    argmax(&out.logits)
                }
            }
        };
        GoalAction::from_index(index)
    }
}
