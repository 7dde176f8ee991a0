//! L2-regularized logistic regression fitted by damped Newton steps on
//! standardized inputs.
//!
//! Objective (weights `w`, bias `b`, `n` rows):
//!
//! ```text
//! L(w, b) = (1/n) Σ [softplus(zᵢ) − yᵢ zᵢ] + (λ/2)‖w‖²,   zᵢ = w·xᵢ + b
//! ```
//!
//! The bias is not penalized.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::scaler::Standardizer;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    /// L2 penalty λ on the weights.
    pub l2: f64,
    pub max_iter: usize,
    /// Stop when the gradient max-norm falls below this.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams { l2: 1e-4, max_iter: 100, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub scaler: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn linear(x: ArrayView2<'_, f64>, w: &[f64], b: f64) -> Vec<f64> {
    x.rows()
        .into_iter()
        .map(|r| r.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b)
        .collect()
}

fn objective(x: ArrayView2<'_, f64>, y: &[u8], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = x.nrows() as f64;
    let data: f64 = linear(x, w, b)
        .iter()
        .zip(y)
        .map(|(&z, &yi)| softplus(z) - f64::from(yi) * z)
        .sum();
    data / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of the objective; the last entry is the bias component.
fn gradient(x: ArrayView2<'_, f64>, y: &[u8], w: &[f64], b: f64, l2: f64) -> Vec<f64> {
    let n = x.nrows() as f64;
    let d = w.len();
    let mut g = vec![0.0; d + 1];
    for (row, (&z, &yi)) in x.rows().into_iter().zip(linear(x, w, b).iter().zip(y)) {
        let r = sigmoid(z) - f64::from(yi);
        for (gj, xj) in g.iter_mut().zip(row.iter()) {
            *gj += r * xj;
        }
        g[d] += r;
    }
    for j in 0..d {
        g[j] = g[j] / n + l2 * w[j];
    }
    g[d] /= n;
    g
}

fn hessian(x: ArrayView2<'_, f64>, w: &[f64], b: f64, l2: f64) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let d = w.len();
    let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
    let mut ext = vec![0.0; d + 1];
    for (row, z) in x.rows().into_iter().zip(linear(x, w, b)) {
        let p = sigmoid(z);
        let s = p * (1.0 - p);
        if s == 0.0 {
            continue;
        }
        for (e, v) in ext.iter_mut().zip(row.iter()) {
            *e = *v;
        }
        ext[d] = 1.0;
        for a in 0..=d {
            let sa = s * ext[a];
            if sa == 0.0 {
                continue;
            }
            for c in a..=d {
                h[(a, c)] += sa * ext[c];
            }
        }
    }
    for a in 0..=d {
        for c in a..=d {
            h[(a, c)] /= n;
            h[(c, a)] = h[(a, c)];
        }
        if a < d {
            h[(a, a)] += l2;
        }
    }
    h
}

fn solve(h: DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let rhs = DVector::from_column_slice(g);
    let dim = h.nrows();
    let mut ridge = 1e-12;
    loop {
        let reg = &h + DMatrix::<f64>::identity(dim, dim) * ridge;
        if let Some(ch) = reg.cholesky() {
            return ch.solve(&rhs).as_slice().to_vec();
        }
        ridge *= 100.0;
        if ridge > 1e6 {
            return g.to_vec();
        }
    }
}

impl LogisticModel {
    pub fn from_parameters(weights: Vec<f64>, bias: f64) -> Self {
        let d = weights.len();
        LogisticModel {
            scaler: Standardizer::identity(d),
            weights,
            bias,
            l2: 0.0,
            iterations: 0,
            converged: true,
        }
    }

    pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], params: &LogisticParams) -> Result<Self> {
        let scaler = Standardizer::fit(x);
        let xs = scaler.transform(x);
        let d = xs.ncols();
        let l2 = params.l2;
        let mut w = vec![0.0; d];
        let pos = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
        let mut b = (pos / (1.0 - pos)).ln();
        let mut converged = false;
        let mut iterations = 0;
        let mut loss = objective(xs.view(), y, &w, b, l2);
        while iterations < params.max_iter {
            let g = gradient(xs.view(), y, &w, b, l2);
            if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= params.tol {
                converged = true;
                break;
            }
            iterations += 1;
            let step = solve(hessian(xs.view(), &w, b, l2), &g);
            let slope: f64 = g.iter().zip(&step).map(|(a, c)| a * c).sum();
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let w_new: Vec<f64> = w.iter().zip(&step).map(|(wi, si)| wi - t * si).collect();
                let b_new = b - t * step[d];
                let l_new = objective(xs.view(), y, &w_new, b_new, l2);
                if l_new <= loss - 1e-4 * t * slope {
                    w = w_new;
                    b = b_new;
                    loss = l_new;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // no further decrease representable; accept current point
                let g = gradient(xs.view(), y, &w, b, l2);
                converged = g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= params.tol.max(1e-6);
                break;
            }
        }
        Ok(LogisticModel { scaler, weights: w, bias: b, l2, iterations, converged })
    }

    pub fn standardize(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.scaler.transform(x)
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let xs = self.scaler.transform(x);
        linear(xs.view(), &self.weights, self.bias).into_iter().map(sigmoid).collect()
    }

    pub fn predict_proba_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let z: f64 = row
            .iter()
            .zip(&self.weights)
            .zip(self.scaler.mean.iter().zip(&self.scaler.scale))
            .map(|((v, w), (m, s))| (v - m) / s * w)
            .sum::<f64>()
            + self.bias;
        sigmoid(z)
    }

    /// Gradient of the training objective at the fitted parameters,
    /// evaluated on raw (unstandardized) encoded inputs. Weight components
    /// first, bias last.
    pub fn objective_gradient(&self, x: ArrayView2<'_, f64>, y: &[u8]) -> Vec<f64> {
        let xs = self.scaler.transform(x);
        gradient(xs.view(), y, &self.weights, self.bias, self.l2)
    }
}
