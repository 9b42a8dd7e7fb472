//! Crosslingual document classification on topic proportions.
//!
//! One binary logistic classifier per label is trained on documents of one
//! language and applied to documents of the other. Labels without a
//! positive training example cannot be learned; they are dropped from both
//! training and scoring.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::logistic::{stratified_folds, LogisticConfig, LogisticRegression};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    pub logistic: LogisticConfig,
    /// Tune a per-label threshold on out-of-fold predictions instead of 0.5.
    pub tune_thresholds: bool,
    pub folds: usize,
    pub seed: u64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            logistic: LogisticConfig {
                lambda: 1.0,
                learning_rate: 4.0,
                epochs: 500,
            },
            tune_thresholds: false,
            folds: 5,
            seed: 1,
        }
    }
}

/// Pooled counts over labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    /// `2TP / (2TP + FP + FN)`; zero when there is nothing to score.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub f1_micro: f64,
    /// Micro-F1 of always predicting the most frequent training label.
    pub majority_f1: f64,
    pub confusion: Confusion,
    pub labels: Vec<String>,
    pub dropped_labels: Vec<String>,
}

fn threshold_for(x: &[Vec<f64>], y: &[bool], cfg: &ClassifyConfig) -> f64 {
    let fold = stratified_folds(y, cfg.folds, cfg.seed);
    let mut scores = vec![0.0; x.len()];
    for f in 0..cfg.folds {
        let (tx, ty): (Vec<Vec<f64>>, Vec<bool>) = (0..x.len())
            .filter(|&i| fold[i] != f)
            .map(|i| (x[i].clone(), y[i]))
            .unzip();
        let m = LogisticRegression::fit(&tx, &ty, &cfg.logistic);
        for i in (0..x.len()).filter(|&i| fold[i] == f) {
            scores[i] = m.predict_proba(&x[i]);
        }
    }
    let mut best = (f64::NEG_INFINITY, 0.5);
    for step in 1..20 {
        let t = step as f64 * 0.05;
        let mut c = Confusion::default();
        for (s, &g) in scores.iter().zip(y) {
            c.add(*s >= t, g);
        }
        if c.f1() > best.0 {
            best = (c.f1(), t);
        }
    }
    best.1
}

/// Trains on `(train_x, train_labels)`, predicts `test_x`, and scores
/// micro-F1 against `test_labels` over the labels seen in training.
pub fn classify_crosslingual(
    train_x: &[Vec<f64>],
    train_labels: &[Vec<String>],
    test_x: &[Vec<f64>],
    test_labels: &[Vec<String>],
    cfg: &ClassifyConfig,
) -> ClassificationResult {
    let mut train_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for ls in train_labels {
        for l in ls {
            *train_freq.entry(l.as_str()).or_default() += 1;
        }
    }
    let all: BTreeSet<&str> = train_labels.iter().chain(test_labels).flatten().map(String::as_str).collect();
    let labels: Vec<&str> = train_freq.keys().copied().collect();
    let dropped: Vec<String> = all
        .iter()
        .filter(|l| !train_freq.contains_key(*l))
        .map(|l| l.to_string())
        .collect();
    for l in &dropped {
        log::warn!("label `{l}` has no positive training example; dropped");
    }

    let per_label: Vec<Confusion> = labels
        .par_iter()
        .map(|&label| {
            let y: Vec<bool> = train_labels.iter().map(|ls| ls.iter().any(|l| l == label)).collect();
            let m = LogisticRegression::fit(train_x, &y, &cfg.logistic);
            let threshold = if cfg.tune_thresholds && y.iter().filter(|&&b| b).count() >= cfg.folds {
                threshold_for(train_x, &y, cfg)
            } else {
                0.5
            };
            let mut c = Confusion::default();
            for (x, gold) in test_x.iter().zip(test_labels) {
                c.add(m.predict_proba(x) >= threshold, gold.iter().any(|l| l == label));
            }
            c
        })
        .collect();
    let mut confusion = Confusion::default();
    for c in &per_label {
        confusion.tp += c.tp;
        confusion.fp += c.fp;
        confusion.fn_ += c.fn_;
    }

    ClassificationResult {
        f1_micro: confusion.f1(),
        majority_f1: majority_baseline(&train_freq, &labels, test_labels),
        confusion,
        labels: labels.iter().map(|l| l.to_string()).collect(),
        dropped_labels: dropped,
    }
}

fn majority_baseline(train_freq: &BTreeMap<&str, usize>, labels: &[&str], test_labels: &[Vec<String>]) -> f64 {
    // Most frequent training label; ties go to the lexicographically first.
    let Some(major) = train_freq.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|e| *e.0) else {
        return 0.0;
    };
    let mut c = Confusion::default();
    for gold in test_labels {
        for &l in labels {
            c.add(l == major, gold.iter().any(|g| g == l));
        }
    }
    c.f1()
}
