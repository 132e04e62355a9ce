//! A small fixed-architecture neural network engine.
//!
//! All parameters of a network live in one flat `Vec<f64>` addressed through a
//! [`Layout`]; gradients use the same layout. That keeps the optimizer, norm
//! clipping, checkpointing and finite-difference checks architecture agnostic.
//!
//! Three trunks are supported, each feeding a policy head (action logits) and
//! a value head:
//!
//! * `Hybrid`: LSTM over the observation window, then a tanh dense layer.
//! * `LstmOnly`: LSTM over the window, heads read the last hidden state.
//! * `Mlp`: the window is flattened and passed through two tanh layers.

mod checkpoint;
mod loss;
mod optim;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Frame;
use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use loss::{
    actor_critic_backward, entropy, log_softmax, q_backward, softmax, LossCoefficients, LossStats, QSample,
    SegmentSample,
};
pub use optim::{clip_global_norm, ApplyOutcome, ParameterStore, RmsProp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Hybrid { hidden: usize, dense: usize },
    LstmOnly { hidden: usize },
    Mlp { hidden: usize },
}

impl Architecture {
    pub fn hybrid() -> Self {
        Architecture::Hybrid { hidden: 32, dense: 64 }
    }

    pub fn lstm_only() -> Self {
        Architecture::LstmOnly { hidden: 32 }
    }

    pub fn mlp() -> Self {
        Architecture::Mlp { hidden: 64 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Architecture::Hybrid { .. } => "hybrid",
            Architecture::LstmOnly { .. } => "lstm",
            Architecture::Mlp { .. } => "mlp",
        }
    }
}

/// Shape description of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetSpec {
    pub arch: Architecture,
    /// Features per frame.
    pub input: usize,
    /// Frames per observation window.
    pub window: usize,
    pub actions: usize,
}

impl NetSpec {
    pub fn new(arch: Architecture) -> Self {
        Self {
            arch,
            input: Frame::FEATURES,
            window: 7,
            actions: crate::dynamics::GoalAction::SERVICE_LEVELS,
        }
    }

    pub fn with_window(self, window: usize) -> Self {
        Self { window, ..self }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }

    pub fn param_count(&self) -> usize {
        self.layout().len()
    }
}

/// Named tensor inside the flat parameter vector; row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub segments: Vec<Segment>,
}

impl Layout {
    fn new(spec: &NetSpec) -> Self {
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |name: &'static str, rows: usize, cols: usize| {
            segments.push(Segment { name, rows, cols, offset });
            offset += rows * cols;
        };
        let trunk_out = match spec.arch {
            Architecture::Hybrid { hidden, dense } => {
                push("lstm.w_x", 4 * hidden, spec.input);
                push("lstm.w_h", 4 * hidden, hidden);
                push("lstm.b", 4 * hidden, 1);
                push("dense.w", dense, hidden);
                push("dense.b", dense, 1);
                dense
            }
            Architecture::LstmOnly { hidden } => {
                push("lstm.w_x", 4 * hidden, spec.input);
                push("lstm.w_h", 4 * hidden, hidden);
                push("lstm.b", 4 * hidden, 1);
                hidden
            }
            Architecture::Mlp { hidden } => {
                push("mlp1.w", hidden, spec.input * spec.window);
                push("mlp1.b", hidden, 1);
                push("mlp2.w", hidden, hidden);
                push("mlp2.b", hidden, 1);
                hidden
            }
        };
        push("actor.w", spec.actions, trunk_out);
        push("actor.b", spec.actions, 1);
        push("critic.w", 1, trunk_out);
        push("critic.b", 1, 1);
        Self { segments }
    }

    pub fn len(&self) -> usize {
        self.segments.last().map(|s| s.offset + s.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    fn range(&self, name: &str) -> std::ops::Range<usize> {
        self.get(name).map(Segment::range).unwrap_or(0..0)
    }
}

/// Network weights, flat.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    spec: NetSpec,
    data: Vec<f64>,
}

impl NetParams {
    pub fn zeros(spec: NetSpec) -> Self {
        let n = spec.param_count();
        Self { spec, data: vec![0.0; n] }
    }

    /// Uniform in `±1/sqrt(fan_in)`, LSTM forget-gate bias set to one.
    pub fn init(spec: NetSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = spec.layout();
        let mut data = vec![0.0; layout.len()];
        for seg in &layout.segments {
            let fan_in = match seg.name {
                "lstm.w_x" | "lstm.w_h" | "lstm.b" => match spec.arch {
                    Architecture::Hybrid { hidden, .. } | Architecture::LstmOnly { hidden } => spec.input + hidden,
                    Architecture::Mlp { .. } => unreachable!(),
                },
                _ if seg.cols > 1 => seg.cols,
                _ => layout
                    .segments
                    .iter()
                    .find(|w| w.name.split('.').next() == seg.name.split('.').next() && w.cols > 1)
                    .map(|w| w.cols)
                    .unwrap_or(1),
            };
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in &mut data[seg.range()] {
                *v = rng.random_range(-bound..bound);
            }
        }
        if let Some(b) = layout.get("lstm.b") {
            let hidden = b.rows / 4;
            for v in &mut data[b.offset + hidden..b.offset + 2 * hidden] {
                *v = 1.0;
            }
        }
        Self { spec, data }
    }

    pub fn from_vec(spec: NetSpec, data: Vec<f64>) -> Result<Self> {
        let want = spec.param_count();
        if data.len() != want {
            return Err(Error::Shape(format!("expected {want} parameters, got {}", data.len())));
        }
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn forward(&self, window: &ObservationWindow) -> Result<NetOutput> {
        self.forward_cached(window).map(|c| c.output)
    }

    pub fn forward_cached(&self, window: &ObservationWindow) -> Result<ForwardCache> {
        if window.frames != self.spec.window || window.features != self.spec.input {
            return Err(Error::Shape(format!(
                "window {}x{} does not match network {}x{}",
                window.frames, window.features, self.spec.window, self.spec.input
            )));
        }
        let layout = self.spec.layout();
        let p = &self.data;
        let mut lstm_steps = Vec::new();
        let mut layers = Vec::new();
        let (trunk, hidden_state) = match self.spec.arch {
            Architecture::Hybrid { hidden, dense } => {
                let (h, steps) = lstm_forward(p, &layout, hidden, window);
                lstm_steps = steps;
                let z = dense_tanh(p, &layout, "dense", dense, &h);
                layers.push(z.clone());
                (z, h)
            }
            Architecture::LstmOnly { hidden } => {
                let (h, steps) = lstm_forward(p, &layout, hidden, window);
                lstm_steps = steps;
                (h.clone(), h)
            }
            Architecture::Mlp { hidden } => {
                let a1 = dense_tanh(p, &layout, "mlp1", hidden, &window.data);
                let a2 = dense_tanh(p, &layout, "mlp2", hidden, &a1);
                layers.push(a1);
                layers.push(a2.clone());
                (a2.clone(), a2)
            }
        };
        let mut logits = vec![0.0; self.spec.actions];
        affine(p, &layout, "actor", &trunk, &mut logits);
        let mut value = [0.0];
        affine(p, &layout, "critic", &trunk, &mut value);
        Ok(ForwardCache {
            input: window.data.clone(),
            lstm_steps,
            layers,
            output: NetOutput {
                logits,
                value: value[0],
                hidden: hidden_state,
            },
        })
    }

    /// Accumulates parameter gradients for upstream gradients on the logits
    /// and the value into `grads`.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &[f64], d_value: f64, grads: &mut Gradients) -> Result<()> {
        if d_logits.len() != self.spec.actions || grads.data.len() != self.data.len() {
            return Err(Error::Shape("gradient buffers do not match network".into()));
        }
        let layout = self.spec.layout();
        let p = &self.data;
        let g = &mut grads.data;
        let trunk: &[f64] = match self.spec.arch {
            Architecture::Hybrid { .. } => &cache.layers[0],
            Architecture::LstmOnly { .. } => &cache.output.hidden,
            Architecture::Mlp { .. } => &cache.layers[1],
        };
        let mut d_trunk = vec![0.0; trunk.len()];
        affine_backward(p, g, &layout, "actor", trunk, d_logits, &mut d_trunk);
        affine_backward(p, g, &layout, "critic", trunk, &[d_value], &mut d_trunk);
        match self.spec.arch {
            Architecture::Hybrid { hidden, .. } => {
                let mut d_h = vec![0.0; hidden];
                dense_tanh_backward(p, g, &layout, "dense", &cache.output.hidden, &cache.layers[0], &d_trunk, &mut d_h);
                lstm_backward(p, g, &layout, hidden, cache, &d_h);
            }
            Architecture::LstmOnly { hidden } => lstm_backward(p, g, &layout, hidden, cache, &d_trunk),
            Architecture::Mlp { hidden } => {
                let mut d_a1 = vec![0.0; hidden];
                dense_tanh_backward(p, g, &layout, "mlp2", &cache.layers[0], &cache.layers[1], &d_trunk, &mut d_a1);
                let mut d_in = vec![0.0; cache.input.len()];
                dense_tanh_backward(p, g, &layout, "mlp1", &cache.input, &cache.layers[0], &d_a1, &mut d_in);
            }
        }
        Ok(())
    }
}

/// Parameter gradients, laid out like [`NetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    data: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &NetParams) -> Self {
        Self {
            data: vec![0.0; params.len()],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// The most recent frames as a `frames x features` row-major matrix, oldest
/// first, zero-padded at the front early in an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWindow {
    frames: usize,
    features: usize,
    data: Vec<f64>,
}

impl ObservationWindow {
    pub fn from_history(history: &[Frame], frames: usize) -> Self {
        let features = Frame::FEATURES;
        let mut data = vec![0.0; frames * features];
        let take = history.len().min(frames);
        let pad = frames - take;
        for (row, frame) in history[history.len() - take..].iter().enumerate() {
            let start = (pad + row) * features;
            data[start..start + features].copy_from_slice(&frame.features());
        }
        Self { frames, features, data }
    }

    pub fn from_rows(frames: usize, features: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * features {
            return Err(Error::Shape(format!("{} values for a {frames}x{features} window", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("observation window contains non-finite features"));
        }
        Ok(Self { frames, features, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.features..(i + 1) * self.features]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frames(&self) -> usize {
        self.frames
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetOutput {
    pub logits: Vec<f64>,
    pub value: f64,
    /// Final recurrent hidden state (last trunk layer for the MLP).
    pub hidden: Vec<f64>,
}

impl NetOutput {
    pub fn greedy(&self) -> usize {
        argmax(&self.logits)
    }
}

/// First index of the maximum; NaNs never win.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
struct LstmStep {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    lstm_steps: Vec<LstmStep>,
    layers: Vec<Vec<f64>>,
    pub output: NetOutput,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn weights<'a>(p: &'a [f64], layout: &Layout, name: &str) -> &'a [f64] {
    &p[layout.range(name)]
}

/// `out = W x + b` for segments `{prefix}.w` / `{prefix}.b`.
fn affine(p: &[f64], layout: &Layout, prefix: &str, x: &[f64], out: &mut [f64]) {
    let w = weights(p, layout, &format!("{prefix}.w"));
    let b = weights(p, layout, &format!("{prefix}.b"));
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o = b[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

fn affine_backward(
    p: &[f64],
    g: &mut [f64],
    layout: &Layout,
    prefix: &str,
    x: &[f64],
    d_out: &[f64],
    d_x: &mut [f64],
) {
    let wr = layout.range(&format!("{prefix}.w"));
    let br = layout.range(&format!("{prefix}.b"));
    let cols = x.len();
    for (r, &dy) in d_out.iter().enumerate() {
        if dy == 0.0 {
            continue;
        }
        g[br.start + r] += dy;
        let row_start = wr.start + r * cols;
        for c in 0..cols {
            g[row_start + c] += dy * x[c];
            d_x[c] += dy * p[row_start + c];
        }
    }
}

fn dense_tanh(p: &[f64], layout: &Layout, prefix: &str, out_dim: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; out_dim];
    affine(p, layout, prefix, x, &mut out);
    out.iter_mut().for_each(|v| *v = v.tanh());
    out
}

#[allow(clippy::too_many_arguments)]
fn dense_tanh_backward(
    p: &[f64],
    g: &mut [f64],
    layout: &Layout,
    prefix: &str,
    x: &[f64],
    y: &[f64],
    d_y: &[f64],
    d_x: &mut [f64],
) {
    let d_pre: Vec<f64> = y.iter().zip(d_y).map(|(y, dy)| dy * (1.0 - y * y)).collect();
    affine_backward(p, g, layout, prefix, x, &d_pre, d_x);
}

fn lstm_forward(p: &[f64], layout: &Layout, hidden: usize, window: &ObservationWindow) -> (Vec<f64>, Vec<LstmStep>) {
    let w_x = weights(p, layout, "lstm.w_x");
    let w_h = weights(p, layout, "lstm.w_h");
    let b = weights(p, layout, "lstm.b");
    let n_in = window.features;
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(window.frames);
    let mut z = vec![0.0; 4 * hidden];
    for t in 0..window.frames {
        let x = window.row(t);
        for (r, zr) in z.iter_mut().enumerate() {
            let wx = &w_x[r * n_in..(r + 1) * n_in];
            let wh = &w_h[r * hidden..(r + 1) * hidden];
            *zr = b[r]
                + wx.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                + wh.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
        }
        let i: Vec<f64> = z[..hidden].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[hidden..2 * hidden].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * hidden..3 * hidden].iter().map(|v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * hidden..].iter().map(|&v| sigmoid(v)).collect();
        for k in 0..hidden {
            c[k] = f[k] * c[k] + i[k] * g[k];
        }
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        for k in 0..hidden {
            h[k] = o[k] * tanh_c[k];
        }
        steps.push(LstmStep {
            i,
            f,
            g,
            o,
            c: c.clone(),
            tanh_c,
        });
    }
    (h, steps)
}

/// Backpropagation through time over the window; only the final hidden state
/// receives an upstream gradient.
fn lstm_backward(p: &[f64], g: &mut [f64], layout: &Layout, hidden: usize, cache: &ForwardCache, d_h_last: &[f64]) {
    let w_h = weights(p, layout, "lstm.w_h");
    let wx_r = layout.range("lstm.w_x");
    let wh_r = layout.range("lstm.w_h");
    let b_r = layout.range("lstm.b");
    let steps = &cache.lstm_steps;
    let n_in = cache.input.len() / steps.len();
    let mut d_h = d_h_last.to_vec();
    let mut d_c = vec![0.0; hidden];
    let mut d_z = vec![0.0; 4 * hidden];
    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        let x = &cache.input[t * n_in..(t + 1) * n_in];
        let zeros = vec![0.0; hidden];
        let (c_prev, h_prev) = if t > 0 {
            let prev = &steps[t - 1];
            (
                prev.c.clone(),
                prev.o.iter().zip(&prev.tanh_c).map(|(o, tc)| o * tc).collect::<Vec<_>>(),
            )
        } else {
            (zeros.clone(), zeros)
        };
        for k in 0..hidden {
            let d_o = d_h[k] * s.tanh_c[k];
            d_c[k] += d_h[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            let d_i = d_c[k] * s.g[k];
            let d_g = d_c[k] * s.i[k];
            let d_f = d_c[k] * c_prev[k];
            d_z[k] = d_i * s.i[k] * (1.0 - s.i[k]);
            d_z[hidden + k] = d_f * s.f[k] * (1.0 - s.f[k]);
            d_z[2 * hidden + k] = d_g * (1.0 - s.g[k] * s.g[k]);
            d_z[3 * hidden + k] = d_o * s.o[k] * (1.0 - s.o[k]);
            d_c[k] *= s.f[k];
        }
        d_h.iter_mut().for_each(|v| *v = 0.0);
        for (r, &dz) in d_z.iter().enumerate() {
            if dz == 0.0 {
                continue;
            }
            g[b_r.start + r] += dz;
            let xr = wx_r.start + r * n_in;
            for (c, xv) in x.iter().enumerate() {
                g[xr + c] += dz * xv;
            }
            let hr = wh_r.start + r * hidden;
            let wrow = &w_h[r * hidden..(r + 1) * hidden];
            for c in 0..hidden {
                g[hr + c] += dz * h_prev[c];
                d_h[c] += dz * wrow[c];
            }
        }
    }
}
