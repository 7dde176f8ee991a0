//! Multilayer perceptron: one or two ReLU hidden layers, logistic output,
//! trained with Adam on minibatches of standardized inputs.
//!
//! Loss: mean binary cross-entropy plus `(alpha/2)·Σ‖W‖²` over the weight
//! matrices (biases are not penalized).

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::scaler::Standardizer;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    /// Widths of the hidden layers (one or two entries).
    pub hidden: Vec<usize>,
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams { hidden: vec![16], alpha: 1e-4, learning_rate: 1e-2, epochs: 50, batch_size: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Shape `(outputs, inputs)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Network parameters without input scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNet {
    pub layers: Vec<Layer>,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl MlpNet {
    /// He-initialized network with `inputs → hidden… → 1` layers.
    pub fn random<R: Rng>(inputs: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in.max(1) as f64).sqrt()).expect("finite std");
                Layer {
                    weights: Array2::from_shape_fn((fan_out, fan_in), |_| normal.sample(rng)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        MlpNet { layers }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut at = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = flat[at];
                at += 1;
            }
            for b in l.bias.iter_mut() {
                *b = flat[at];
                at += 1;
            }
        }
    }

    /// Pre-activations of every layer; the last one is the output logit.
    fn forward(&self, x: ArrayView2<'_, f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut acts = vec![x.to_owned()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let z = acts[i].dot(&l.weights.t()) + &l.bias;
            if i + 1 < self.layers.len() {
                acts.push(z.mapv(|v| v.max(0.0)));
            }
            pre.push(z);
        }
        (acts, pre)
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let (_, pre) = self.forward(x);
        pre.last().map(|z| z.column(0).iter().map(|&v| sigmoid(v)).collect()).unwrap_or_default()
    }

    /// Loss and its gradient with respect to [`MlpNet::flat_params`].
    pub fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, y: &[u8], alpha: f64) -> (f64, Vec<f64>) {
        let n = x.nrows() as f64;
        let (acts, pre) = self.forward(x);
        let logits = pre.last().expect("at least one layer").column(0).to_owned();
        let mut loss = 0.0;
        let mut delta = Array2::<f64>::zeros((x.nrows(), 1));
        for (i, (&z, &yi)) in logits.iter().zip(y).enumerate() {
            let t = f64::from(yi);
            loss += softplus(z) - t * z;
            delta[(i, 0)] = (sigmoid(z) - t) / n;
        }
        loss /= n;
        loss += 0.5 * alpha * self.layers.iter().map(|l| l.weights.iter().map(|w| w * w).sum::<f64>()).sum::<f64>();

        let mut grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(self.layers.len());
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let gw = delta.t().dot(&acts[li]) + &(alpha * &layer.weights);
            let gb = delta.sum_axis(Axis(0));
            if li > 0 {
                let mut back = delta.dot(&layer.weights);
                back.zip_mut_with(&pre[li - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        let mut flat = Vec::with_capacity(self.n_params());
        for (gw, gb) in grads {
            flat.extend(gw.iter());
            flat.extend(gb.iter());
        }
        (loss, flat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub scaler: Standardizer,
    pub net: MlpNet,
}

impl MlpModel {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], params: &MlpParams, seed: u64) -> Result<Self> {
        if params.hidden.is_empty() || params.hidden.len() > 2 || params.hidden.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "mlp needs one or two non-empty hidden layers, got {:?}",
                params.hidden
            )));
        }
        if params.batch_size == 0 || !(params.learning_rate > 0.0) {
            return Err(Error::InvalidInput("mlp batch_size and learning_rate must be positive".into()));
        }
        let scaler = Standardizer::fit(x);
        let xs = scaler.transform(x);
        let mut rng = rng_from_seed(seed);
        let mut net = MlpNet::random(xs.ncols(), &params.hidden, &mut rng);

        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let mut theta = net.flat_params();
        let mut m = vec![0.0; theta.len()];
        let mut v = vec![0.0; theta.len()];
        let mut t = 0i32;
        let mut order: Vec<usize> = (0..xs.nrows()).collect();
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size) {
                let xb = xs.select(Axis(0), batch);
                let yb: Vec<u8> = batch.iter().map(|&i| y[i]).collect();
                let (_, g) = net.loss_and_gradient(xb.view(), &yb, params.alpha);
                t += 1;
                let c1 = 1.0 - b1.powi(t);
                let c2 = 1.0 - b2.powi(t);
                for j in 0..theta.len() {
                    m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                    v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                    theta[j] -= params.learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
                }
                net.set_flat_params(&theta);
            }
        }
        Ok(MlpModel { scaler, net })
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        self.net.predict_proba(self.scaler.transform(x).view())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn flat_roundtrip() {
        let mut rng = rng_from_seed(3);
        let net = MlpNet::random(3, &[4, 2], &mut rng);
        assert_eq!(net.n_params(), 3 * 4 + 4 + 4 * 2 + 2 + 2 + 1);
        let mut other = MlpNet::random(3, &[4, 2], &mut rng);
        other.set_flat_params(&net.flat_params());
        assert_eq!(other, net);
    }

    #[test]
    fn learns_xor() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let xs = ndarray::concatenate(Axis(0), &vec![x.view(); 25]).unwrap();
        let y: Vec<u8> = (0..100).map(|i| [0u8, 1, 1, 0][i % 4]).collect();
        let params = MlpParams { hidden: vec![8], epochs: 300, batch_size: 16, ..Default::default() };
        let m = MlpModel::fit(xs.view(), &y, &params, 1).unwrap();
        let p = m.predict_proba(x.view());
        assert!(p[0] < 0.5 && p[1] > 0.5 && p[2] > 0.5 && p[3] < 0.5, "{p:?}");
    }

    #[test]
    fn rejects_three_hidden_layers() {
        let x = array![[0.0], [1.0]];
        let params = MlpParams { hidden: vec![2, 2, 2], ..Default::default() };
        assert!(MlpModel::fit(x.view(), &[0, 1], &params, 0).is_err());
    }
}
