//! One-hidden-layer network with softmax output, trained by mini-batch
//! gradient descent on the mean cross-entropy.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{argmax, check_dim, column_stats, standardize, LearnError, Result, TrainingData};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    /// `1 / (1 + e^-z)`
    Logistic,
    /// `e^(-z^2)`
    GaussianRbf,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
            Activation::GaussianRbf => (-z * z).exp(),
        }
    }

    /// Derivative expressed through the input `z` and the output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Logistic => a * (1.0 - a),
            Activation::GaussianRbf => -2.0 * z * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnParams {
    pub hidden: usize,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for AnnParams {
    fn default() -> Self {
        Self {
            hidden: 10,
            activation: Activation::Logistic,
            learning_rate: 0.01,
            epochs: 500,
            batch_size: 32,
        }
    }
}

/// Network weights; all matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub n_outputs: usize,
    pub activation: Activation,
    /// `n_hidden x n_inputs`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `n_outputs x n_hidden`
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Mlp {
    pub fn zeros(n_inputs: usize, n_hidden: usize, n_outputs: usize, activation: Activation) -> Self {
        Self {
            n_inputs,
            n_hidden,
            n_outputs,
            activation,
            w1: vec![0.0; n_hidden * n_inputs],
            b1: vec![0.0; n_hidden],
            w2: vec![0.0; n_outputs * n_hidden],
            b2: vec![0.0; n_outputs],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random(
        n_inputs: usize,
        n_hidden: usize,
        n_outputs: usize,
        activation: Activation,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let mut m = Self::zeros(n_inputs, n_hidden, n_outputs, activation);
        let r1 = (6.0 / (n_inputs + n_hidden) as f64).sqrt();
        let r2 = (6.0 / (n_hidden + n_outputs) as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = rng.random_range(-r1..r1));
        m.w2.iter_mut().for_each(|w| *w = rng.random_range(-r2..r2));
        m
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Flattened parameters: w1, b1, w2, b2.
    pub fn params(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
    }

    fn hidden(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let z: Vec<f64> = (0..self.n_hidden)
            .map(|h| {
                let row = &self.w1[h * self.n_inputs..(h + 1) * self.n_inputs];
                self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        let a = z.iter().map(|&z| self.activation.apply(z)).collect();
        (z, a)
    }

    fn output(&self, a: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = (0..self.n_outputs)
            .map(|o| {
                let row = &self.w2[o * self.n_hidden..(o + 1) * self.n_hidden];
                self.b2[o] + row.iter().zip(a).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        softmax(&logits)
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let (_, a) = self.hidden(x);
        self.output(&a)
    }

    /// Mean cross-entropy over the batch and its gradient (flattened like
    /// [`Mlp::params`]).
    pub fn loss_and_gradient(&self, xs: &[&[f64]], ys: &[usize]) -> (f64, Vec<f64>) {
        let (d, h, k) = (self.n_inputs, self.n_hidden, self.n_outputs);
        let mut gw1 = vec![0.0; h * d];
        let mut gb1 = vec![0.0; h];
        let mut gw2 = vec![0.0; k * h];
        let mut gb2 = vec![0.0; k];
        let mut loss = 0.0;
        let m = xs.len() as f64;

        for (x, &y) in xs.iter().zip(ys) {
            let (z, a) = self.hidden(x);
            let p = self.output(&a);
            loss -= p[y].ln();

            // dL/dlogit = p - onehot(y)
            let delta_out: Vec<f64> = (0..k).map(|o| p[o] - if o == y { 1.0 } else { 0.0 }).collect();
            let mut delta_hidden = vec![0.0; h];
            for o in 0..k {
                gb2[o] += delta_out[o];
                for j in 0..h {
                    gw2[o * h + j] += delta_out[o] * a[j];
                    delta_hidden[j] += delta_out[o] * self.w2[o * h + j];
                }
            }
            for j in 0..h {
                let dz = delta_hidden[j] * self.activation.derivative(z[j], a[j]);
                gb1[j] += dz;
                for i in 0..d {
                    gw1[j * d + i] += dz * x[i];
                }
            }
        }
        let mut grad = [gw1, gb1, gw2, gb2].concat();
        grad.iter_mut().for_each(|g| *g /= m);
        (loss / m, grad)
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel {
    pub net: Mlp,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub params: AnnParams,
    pub seed: u64,
    /// Mean training loss after the final epoch.
    pub final_loss: f64,
}

impl AnnModel {
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x.len(), self.means.len())?;
        Ok(self.net.probabilities(&standardize(x, &self.means, &self.stds)))
    }

    pub fn predict_index(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.probabilities(x)?))
    }
}

/// Standardizes inputs with training statistics, then runs mini-batch
/// gradient descent through backpropagation.
pub fn train_ann(data: &TrainingData, params: &AnnParams, seed: u64) -> Result<AnnModel> {
    if data.is_empty() {
        return Err(LearnError::Train("cannot train a network on an empty dataset".into()));
    }
    if params.hidden == 0 || params.batch_size == 0 || !(params.learning_rate > 0.0) {
        return Err(LearnError::Config(format!(
            "hidden ({}) and batch_size ({}) must be >= 1 and learning_rate ({}) > 0",
            params.hidden, params.batch_size, params.learning_rate
        )));
    }
    let d = data.n_features();
    let (means, stds) = column_stats(&data.x, d);
    let xs: Vec<Vec<f64>> = data.x.iter().map(|r| standardize(r, &means, &stds)).collect();
    let mut rng = seeded(seed);
    let mut net = Mlp::random(d, params.hidden, data.n_classes(), params.activation, &mut rng);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_loss = f64::NAN;

    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(params.batch_size).enumerate() {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| xs[i].as_slice()).collect();
            let by: Vec<usize> = batch.iter().map(|&i| data.y[i]).collect();
            let (loss, grad) = net.loss_and_gradient(&bx, &by);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(LearnError::Train(format!(
                    "non-finite loss {loss} at epoch {epoch}, batch {b} (learning rate {})",
                    params.learning_rate
                )));
            }
            total += loss * batch.len() as f64;
            let mut p = net.params();
            for (w, g) in p.iter_mut().zip(&grad) {
                *w -= params.learning_rate * g;
            }
            net.set_params(&p);
        }
        epoch_loss = total / data.len() as f64;
    }

    Ok(AnnModel { net, means, stds, params: params.clone(), seed, final_loss: epoch_loss })
}
