//! One-hidden-layer perceptron (tanh hidden units, linear output) trained by
//! mini-batch SGD on squared loss.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, RegressError, Surrogate};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub rate: f64,
    pub batch: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: 16, epochs: 2000, rate: 0.01, batch: 32 }
    }
}

/// Network weights. Flattened parameter order is `w1` (row-major, one row per
/// hidden unit), `b1`, `w2`, `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    inputs: usize,
    hidden: usize,
    params: Vec<f64>,
}

impl Mlp {
    pub fn new(inputs: usize, hidden: usize, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), Self::param_count(inputs, hidden));
        Self { inputs, hidden, params }
    }

    /// Glorot-uniform weights, zero hidden biases, output bias `bias`.
    pub fn init<R: Rng>(inputs: usize, hidden: usize, bias: f64, rng: &mut R) -> Self {
        let mut params = vec![0.0; Self::param_count(inputs, hidden)];
        let a1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        for w in &mut params[..inputs * hidden] {
            *w = rng.random_range(-a1..a1);
        }
        let w2 = inputs * hidden + hidden;
        for w in &mut params[w2..w2 + hidden] {
            *w = rng.random_range(-a2..a2);
        }
        params[w2 + hidden] = bias;
        Self { inputs, hidden, params }
    }

    pub fn param_count(inputs: usize, hidden: usize) -> usize {
        inputs * hidden + 2 * hidden + 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let (k, h) = (self.inputs, self.hidden);
        let p = &self.params;
        (&p[..k * h], &p[k * h..k * h + h], &p[k * h + h..k * h + 2 * h], p[k * h + 2 * h])
    }

    fn hidden_activations(&self, x: &[f64], out: &mut [f64]) {
        let (w1, b1, _, _) = self.split();
        for (j, a) in out.iter_mut().enumerate() {
            let row = &w1[j * self.inputs..(j + 1) * self.inputs];
            let z: f64 = b1[j] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
            *a = z.tanh();
        }
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut a = vec![0.0; self.hidden];
        self.hidden_activations(x, &mut a);
        let (_, _, w2, b2) = self.split();
        b2 + a.iter().zip(w2).map(|(ai, wi)| ai * wi).sum::<f64>()
    }

    /// Mean squared error over the rows `idx` and its gradient with respect
    /// to the flattened parameters.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[f64], idx: &[usize]) -> (f64, Vec<f64>) {
        let (k, h) = (self.inputs, self.hidden);
        let (_, _, w2, _) = self.split();
        let mut grad = vec![0.0; self.params.len()];
        let mut a = vec![0.0; h];
        let mut loss = 0.0;
        let scale = 1.0 / idx.len() as f64;
        for &i in idx {
            let x = &xs[i];
            self.hidden_activations(x, &mut a);
            let out = self.params[k * h + 2 * h] + a.iter().zip(w2).map(|(ai, wi)| ai * wi).sum::<f64>();
            let err = out - ys[i];
            loss += err * err * scale;
            let delta = 2.0 * err * scale;
            for j in 0..h {
                grad[k * h + h + j] += delta * a[j];
                let dz = delta * w2[j] * (1.0 - a[j] * a[j]);
                grad[k * h + j] += dz;
                for (g, xi) in grad[j * k..(j + 1) * k].iter_mut().zip(x) {
                    *g += dz * xi;
                }
            }
            grad[k * h + 2 * h] += delta;
        }
        (loss, grad)
    }
}

/// Trained network plus the input standardization it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSurrogate {
    net: Mlp,
    mean: Vec<f64>,
    scale: Vec<f64>,
    train_size: usize,
    final_loss: f64,
}

impl MlpSurrogate {
    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    /// Mean squared training error after the last epoch.
    pub fn final_loss(&self) -> f64 {
        self.final_loss
    }

    fn standardize(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(self.mean.iter().zip(&self.scale)).map(|(x, (m, s))| (x - m) / s).collect()
    }
}

impl Surrogate for MlpSurrogate {
    fn predict(&self, theta: &[f64]) -> f64 {
        self.net.forward(&self.standardize(theta))
    }
}

pub fn fit(data: &Dataset, cfg: &MlpConfig, seed: u64) -> Result<MlpSurrogate, RegressError> {
    if cfg.hidden == 0 || cfg.batch == 0 {
        return Err(RegressError::InvalidConfig("hidden and batch sizes must be positive".into()));
    }
    if !(cfg.rate > 0.0 && cfg.rate.is_finite()) {
        return Err(RegressError::InvalidConfig(format!("learning rate {}", cfg.rate)));
    }
    let n = data.len();
    let k = data.dim();
    let mut mean = vec![0.0; k];
    for t in data.thetas() {
        for (m, x) in mean.iter_mut().zip(t) {
            *m += x / n as f64;
        }
    }
    let mut scale = vec![0.0; k];
    for t in data.thetas() {
        for ((s, x), m) in scale.iter_mut().zip(t).zip(&mean) {
            *s += (x - m) * (x - m) / n as f64;
        }
    }
    for s in &mut scale {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let xs: Vec<Vec<f64>> = data
        .thetas()
        .iter()
        .map(|t| t.iter().zip(mean.iter().zip(&scale)).map(|(x, (m, s))| (x - m) / s).collect())
        .collect();
    let ys = data.rhos();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y_mean = ys.iter().sum::<f64>() / n as f64;
    let mut net = Mlp::init(k, cfg.hidden, y_mean, &mut rng);
    let mut order: Vec<usize> = (0..n).collect();
    let all: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch) {
            let (_, grad) = net.loss_and_gradient(&xs, ys, batch);
            for (p, g) in net.params.iter_mut().zip(&grad) {
                *p -= cfg.rate * g;
            }
        }
        if net.params.iter().any(|p| !p.is_finite()) {
            return Err(RegressError::NonFinite(format!("weights diverged in epoch {epoch}")));
        }
    }
    let (final_loss, _) = net.loss_and_gradient(&xs, ys, &all);
    if !final_loss.is_finite() {
        return Err(RegressError::NonFinite("training loss".into()));
    }
    Ok(MlpSurrogate { net, mean, scale, train_size: n, final_loss })
}
