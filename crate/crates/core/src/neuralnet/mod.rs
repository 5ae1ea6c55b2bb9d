//! Single-hidden-layer perceptrons and their trainers.
//!
//! The hidden layer uses tanh; the output layer is either linear (regression)
//! or softmax (classification). Parameters live in one flat vector laid out as
//! hidden weights (row-major, hidden x inputs), hidden biases, output weights
//! (row-major, outputs x hidden), output biases.

mod lm;
mod scg;
mod split;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

pub use lm::LevenbergMarquardt;
pub use scg::ScaledConjugateGradient;
pub use split::{split_counts, split_dataset, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Identity,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub output: OutputKind,
}

impl MlpArchitecture {
    pub fn regressor(inputs: usize, hidden: usize) -> Self {
        MlpArchitecture {
            inputs,
            hidden,
            outputs: 1,
            output: OutputKind::Identity,
        }
    }

    pub fn classifier(inputs: usize, hidden: usize, classes: usize) -> Self {
        MlpArchitecture {
            inputs,
            hidden,
            outputs: classes,
            output: OutputKind::Softmax,
        }
    }

    pub fn param_count(&self) -> usize {
        self.hidden * self.inputs + self.hidden + self.outputs * self.hidden + self.outputs
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.hidden == 0 || self.outputs == 0 {
            return Err(Error::InvalidConfig(format!(
                "network sizes must be >= 1, got {}-{}-{}",
                self.inputs, self.hidden, self.outputs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    CrossEntropy,
}

/// A network with its parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub arch: MlpArchitecture,
    pub params: Vec<f64>,
}

/// Offsets of the four parameter blocks.
struct Layout {
    bh: usize,
    wo: usize,
    bo: usize,
}

impl Mlp {
    pub fn zeros(arch: MlpArchitecture) -> Result<Self> {
        arch.validate()?;
        Ok(Mlp {
            arch,
            params: vec![0.0; arch.param_count()],
        })
    }

    /// Uniform weights and biases in +-1/sqrt(fan_in).
    pub fn init(arch: MlpArchitecture, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = net.layout();
        let (p, q) = (arch.inputs as f64, arch.hidden as f64);
        for (i, w) in net.params.iter_mut().enumerate() {
            let bound = if i < l.wo { 1.0 / p.sqrt() } else { 1.0 / q.sqrt() };
            *w = rng.random_range(-bound..bound);
        }
        Ok(net)
    }

    pub fn from_params(arch: MlpArchitecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::Dimension(format!(
                "{} parameters for an architecture needing {}",
                params.len(),
                arch.param_count()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalInstability("non-finite network parameter".into()));
        }
        Ok(Mlp { arch, params })
    }

    fn layout(&self) -> Layout {
        let a = &self.arch;
        let bh = a.hidden * a.inputs;
        let wo = bh + a.hidden;
        Layout {
            bh,
            wo,
            bo: wo + a.outputs * a.hidden,
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.inputs {
            return Err(Error::Dimension(format!(
                "input of length {}, network expects {}",
                x.len(),
                self.arch.inputs
            )));
        }
        Ok(())
    }

    /// Hidden activations and output pre-activations.
    fn pass(&self, x: &[f64], hidden: &mut [f64], pre: &mut [f64]) {
        let a = &self.arch;
        let l = self.layout();
        let w = &self.params;
        for (q, h) in hidden.iter_mut().enumerate() {
            let row = &w[q * a.inputs..(q + 1) * a.inputs];
            let s: f64 = row.iter().zip(x).map(|(wi, xi)| wi * xi).sum();
            *h = (s + w[l.bh + q]).tanh();
        }
        for (t, o) in pre.iter_mut().enumerate() {
            let row = &w[l.wo + t * a.hidden..l.wo + (t + 1) * a.hidden];
            let s: f64 = row.iter().zip(hidden.iter()).map(|(wi, hi)| wi * hi).sum();
            *o = s + w[l.bo + t];
        }
    }

    fn activate(&self, pre: &mut [f64]) {
        if self.arch.output == OutputKind::Softmax {
            softmax_in_place(pre);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = vec![0.0; self.arch.hidden];
        let mut o = vec![0.0; self.arch.outputs];
        self.pass(x, &mut h, &mut o);
        self.activate(&mut o);
        Ok(o)
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Mean loss over a batch.
    pub fn loss(&self, data: &Samples, loss: Loss) -> Result<f64> {
        data.check(&self.arch)?;
        let mut h = vec![0.0; self.arch.hidden];
        let mut o = vec![0.0; self.arch.outputs];
        let mut total = 0.0;
        for n in 0..data.len() {
            self.pass(&data.x[n], &mut h, &mut o);
            self.activate(&mut o);
            total += data.weight(n) * sample_loss(&o, &data.y[n], loss);
        }
        Ok(total / data.total_weight() / loss_scale(loss, self.arch.outputs))
    }

    /// Exact gradient of [`Mlp::loss`] by backpropagation.
    pub fn gradient(&self, data: &Samples, loss: Loss) -> Result<Vec<f64>> {
        data.check(&self.arch)?;
        if data.is_empty() {
            return Err(Error::InsufficientData("gradient of an empty batch".into()));
        }
        let a = self.arch;
        let l = self.layout();
        let mut g = vec![0.0; self.params.len()];
        let mut h = vec![0.0; a.hidden];
        let mut o = vec![0.0; a.outputs];
        let mut d_out = vec![0.0; a.outputs];
        let mut d_hid = vec![0.0; a.hidden];
        let norm = data.total_weight() * loss_scale(loss, a.outputs);
        for n in 0..data.len() {
            let x = &data.x[n];
            let t = &data.y[n];
            self.pass(x, &mut h, &mut o);
            self.activate(&mut o);
            let w = data.weight(n) / norm;
            output_delta(&o, t, loss, a.output, &mut d_out);
            d_out.iter_mut().for_each(|d| *d *= w);
            self.backprop(x, &h, &d_out, &mut d_hid, &mut g, &l);
        }
        Ok(g)
    }

    /// Accumulates the parameter gradient for output pre-activation
    /// sensitivities `d_out`.
    fn backprop(&self, x: &[f64], h: &[f64], d_out: &[f64], d_hid: &mut [f64], g: &mut [f64], l: &Layout) {
        let a = &self.arch;
        let w = &self.params;
        for (q, dh) in d_hid.iter_mut().enumerate() {
            let s: f64 = (0..a.outputs).map(|t| w[l.wo + t * a.hidden + q] * d_out[t]).sum();
            *dh = s * (1.0 - h[q] * h[q]);
        }
        for (t, &d) in d_out.iter().enumerate() {
            let base = l.wo + t * a.hidden;
            for q in 0..a.hidden {
                g[base + q] += d * h[q];
            }
            g[l.bo + t] += d;
        }
        for (q, &d) in d_hid.iter().enumerate() {
            let row = &mut g[q * a.inputs..(q + 1) * a.inputs];
            for (gi, xi) in row.iter_mut().zip(x) {
                *gi += d * xi;
            }
            g[l.bh + q] += d;
        }
    }

    /// Residuals (output - target, sample-major) and their Jacobian rows with
    /// respect to the parameters. Only defined for linear outputs.
    pub fn residual_jacobian(&self, data: &Samples) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        data.check(&self.arch)?;
        if self.arch.output != OutputKind::Identity {
            return Err(Error::InvalidConfig("Jacobian training needs a linear output layer".into()));
        }
        let a = self.arch;
        let l = self.layout();
        let mut h = vec![0.0; a.hidden];
        let mut o = vec![0.0; a.outputs];
        let mut d_out = vec![0.0; a.outputs];
        let mut d_hid = vec![0.0; a.hidden];
        let mut r = Vec::with_capacity(data.len() * a.outputs);
        let mut rows = Vec::with_capacity(data.len() * a.outputs);
        for n in 0..data.len() {
            self.pass(&data.x[n], &mut h, &mut o);
            let sw = data.weight(n).sqrt();
            for t in 0..a.outputs {
                r.push(sw * (o[t] - data.y[n][t]));
                d_out.iter_mut().enumerate().for_each(|(k, d)| *d = if k == t { sw } else { 0.0 });
                let mut row = vec![0.0; self.params.len()];
                self.backprop(&data.x[n], &h, &d_out, &mut d_hid, &mut row, &l);
                rows.push(row);
            }
        }
        Ok((r, rows))
    }
}

/// Per-loss divisor applied on top of the sample weight sum.
fn loss_scale(loss: Loss, outputs: usize) -> f64 {
    match loss {
        Loss::Mse => outputs as f64,
        Loss::CrossEntropy => 1.0,
    }
}

fn sample_loss(y: &[f64], t: &[f64], loss: Loss) -> f64 {
    match loss {
        Loss::Mse => y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum(),
        Loss::CrossEntropy => -y
            .iter()
            .zip(t)
            .filter(|(_, &tk)| tk != 0.0)
            .map(|(yk, tk)| tk * yk.max(f64::MIN_POSITIVE).ln())
            .sum::<f64>(),
    }
}

/// d(sample loss)/d(output pre-activation).
fn output_delta(y: &[f64], t: &[f64], loss: Loss, kind: OutputKind, out: &mut [f64]) {
    match (loss, kind) {
        (Loss::CrossEntropy, OutputKind::Softmax) => {
            let ts: f64 = t.iter().sum();
            for k in 0..y.len() {
                out[k] = y[k] * ts - t[k];
            }
        }
        (Loss::CrossEntropy, OutputKind::Identity) => {
            for k in 0..y.len() {
                out[k] = -t[k] / y[k];
            }
        }
        (Loss::Mse, OutputKind::Identity) => {
            for k in 0..y.len() {
                out[k] = 2.0 * (y[k] - t[k]);
            }
        }
        (Loss::Mse, OutputKind::Softmax) => {
            let g: Vec<f64> = y.iter().zip(t).map(|(a, b)| 2.0 * (a - b)).collect();
            let gy: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
            for k in 0..y.len() {
                out[k] = y[k] * (g[k] - gy);
            }
        }
    }
}

pub fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    v.iter_mut().for_each(|x| *x /= s);
}

/// Index of the largest value; the first one on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn one_hot(class: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[class] = 1.0;
    v
}

/// A batch of inputs, targets and optional per-sample weights.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [Vec<f64>],
    pub w: Option<&'a [f64]>,
}

impl<'a> Samples<'a> {
    pub fn new(x: &'a [Vec<f64>], y: &'a [Vec<f64>]) -> Self {
        Samples { x, y, w: None }
    }

    pub fn weighted(x: &'a [Vec<f64>], y: &'a [Vec<f64>], w: &'a [f64]) -> Self {
        Samples { x, y, w: Some(w) }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn weight(&self, n: usize) -> f64 {
        self.w.map_or(1.0, |w| w[n])
    }

    fn total_weight(&self) -> f64 {
        self.w.map_or(self.len() as f64, |w| w.iter().sum())
    }

    fn check(&self, arch: &MlpArchitecture) -> Result<()> {
        if self.y.len() != self.x.len() || self.w.is_some_and(|w| w.len() != self.x.len()) {
            return Err(Error::Dimension(format!(
                "{} inputs but {} targets",
                self.x.len(),
                self.y.len()
            )));
        }
        for (x, y) in self.x.iter().zip(self.y) {
            if x.len() != arch.inputs || y.len() != arch.outputs {
                return Err(Error::Dimension(format!(
                    "sample {}->{} does not fit a {}-{}-{} network",
                    x.len(),
                    y.len(),
                    arch.inputs,
                    arch.hidden,
                    arch.outputs
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    /// 0 leaves the initial weights untouched.
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub min_gradient: f64,
    pub mu_init: f64,
    pub mu_up: f64,
    pub mu_down: f64,
    pub mu_max: f64,
    pub sigma: f64,
    pub lambda_init: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_epochs: 1000,
            patience: 20,
            min_gradient: 1e-6,
            mu_init: 1e-3,
            mu_up: 10.0,
            mu_down: 10.0,
            mu_max: 1e10,
            sigma: 5e-5,
            lambda_init: 5e-7,
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be >= 1".into()));
        }
        if !(self.mu_init > 0.0 && self.mu_up > 1.0 && self.mu_down > 1.0 && self.mu_max > self.mu_init) {
            return Err(Error::InvalidConfig("bad damping schedule".into()));
        }
        if !(self.sigma > 0.0 && self.lambda_init > 0.0) {
            return Err(Error::InvalidConfig("sigma and lambda must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    Patience,
    SmallGradient,
    DampingExhausted,
    ZeroLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub trainer: String,
    pub epochs: usize,
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub stop: StopReason,
}

/// Tracks the best validation loss and the parameters that produced it.
pub(crate) struct EarlyStop {
    best: f64,
    best_params: Vec<f64>,
    best_epoch: usize,
    stale: usize,
    patience: usize,
}

impl EarlyStop {
    pub(crate) fn new(params: &[f64], val: Option<f64>, patience: usize) -> Self {
        EarlyStop {
            best: val.unwrap_or(f64::INFINITY),
            best_params: params.to_vec(),
            best_epoch: 0,
            stale: 0,
            patience,
        }
    }

    /// Returns true when patience is exhausted.
    pub(crate) fn update(&mut self, epoch: usize, params: &[f64], val: f64) -> bool {
        if val < self.best {
            self.best = val;
            self.best_params.copy_from_slice(params);
            self.best_epoch = epoch;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }

    pub(crate) fn finish(self, params: &mut [f64]) -> usize {
        params.copy_from_slice(&self.best_params);
        self.best_epoch
    }
}

pub trait Trainer: Send + Sync {
    fn name(&self) -> &'static str;

    fn loss(&self) -> Loss;

    /// Trains `net` in place. With a validation batch the returned parameters
    /// are those with the lowest validation loss; without one, the last ones.
    fn train(&self, net: &mut Mlp, train: &Samples, val: Option<&Samples>, opts: &TrainOptions) -> Result<TrainReport>;
}

pub static TRAINERS: Registry<dyn Trainer> = Registry::new(
    "trainer",
    &[
        ("lm", || Box::new(LevenbergMarquardt)),
        ("scg", || Box::new(ScaledConjugateGradient)),
    ],
);

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests;
