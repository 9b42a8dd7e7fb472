//! Binary L2-regularized logistic regression trained by full-batch
//! gradient descent, plus stratified k-fold helpers.
//!
//! The objective is `Σ_i logloss_i + (λ/2)‖w‖²` with the bias unpenalized,
//! the same scaling as a liblinear-style `C = 1/λ`. Each epoch takes one
//! step of size `learning_rate / n` along the gradient.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            learning_rate: 1.0,
            epochs: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Objective value and its gradient with respect to `(weights, bias)`.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    x: &[Vec<f64>],
    y: &[bool],
    lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let mut loss = 0.5 * lambda * dot(weights, weights);
    let mut grad: Vec<f64> = weights.iter().map(|w| lambda * w).collect();
    let mut grad_bias = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let z = dot(weights, xi) + bias;
        let t = if yi { 1.0 } else { 0.0 };
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, v) in grad.iter_mut().zip(xi) {
            *g += r * v;
        }
        grad_bias += r;
    }
    (loss, grad, grad_bias)
}

impl LogisticRegression {
    pub fn fit(x: &[Vec<f64>], y: &[bool], cfg: &LogisticConfig) -> Self {
        let dim = x.first().map_or(0, Vec::len);
        let mut model = Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        };
        if x.is_empty() {
            return model;
        }
        let step = cfg.learning_rate / x.len() as f64;
        for _ in 0..cfg.epochs {
            let (_, grad, grad_bias) = loss_and_gradient(&model.weights, model.bias, x, y, cfg.lambda);
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                *w -= step * g;
            }
            model.bias -= step * grad_bias;
        }
        model
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.predict_proba(x) >= 0.5
    }
}

/// Assigns each example a fold in `0..k` so that every fold receives a near
/// equal share of each class. Within a class, examples are shuffled under
/// `seed` and dealt round-robin.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            fold[i] = j % k;
        }
    }
    fold
}

/// Assigns each of `n` groups a fold in `0..k`: shuffled under `seed`, then
/// dealt round-robin.
pub fn grouped_folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut fold = vec![0; n];
    for (j, i) in idx.into_iter().enumerate() {
        fold[i] = j % k;
    }
    fold
}

/// Mean held-out accuracy over the folds `0..k` given by `fold`.
pub fn cross_validated_accuracy(x: &[Vec<f64>], y: &[bool], fold: &[usize], k: usize, cfg: &LogisticConfig) -> f64 {
    let accuracies: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..x.len() {
                if fold[i] == f {
                    vx.push(x[i].clone());
                    vy.push(y[i]);
                } else {
                    tx.push(x[i].clone());
                    ty.push(y[i]);
                }
            }
            if vx.is_empty() {
                return f64::NAN;
            }
            let m = LogisticRegression::fit(&tx, &ty, cfg);
            let correct = vx.iter().zip(&vy).filter(|(xi, &yi)| m.predict(xi) == yi).count();
            correct as f64 / vx.len() as f64
        })
        .collect();
    let used: Vec<f64> = accuracies.into_iter().filter(|a| !a.is_nan()).collect();
    used.iter().sum::<f64>() / used.len() as f64
}
