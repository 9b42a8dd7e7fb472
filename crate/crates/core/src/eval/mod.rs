//! Intrinsic and extrinsic evaluation, and synthetic test worlds.

pub mod classify;
pub mod cnpmi;
pub mod synthetic;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use classify::{classify_crosslingual, ClassificationResult, ClassifyConfig, Confusion};
pub use cnpmi::{cnpmi_model, cnpmi_topic, npmi, top_words, RawReferencePair, ReferenceCorpus};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticWorld};

/// Classification scores for one train-language / test-language direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionF1 {
    pub train_language: String,
    pub test_language: String,
    pub f1_micro: f64,
    pub majority_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnpmi_per_topic: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnpmi_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub f1_micro: Vec<DirectionF1>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lis_final: Option<f64>,
    pub metadata: BTreeMap<String, String>,
}

/// Trains on the labelled documents `train` with proportions `train_theta`
/// and scores predictions for `test`.
pub fn classify_direction(
    train: &crate::corpus::Corpus,
    train_theta: &[Vec<f64>],
    test: &crate::corpus::Corpus,
    test_theta: &[Vec<f64>],
    cfg: &ClassifyConfig,
) -> DirectionF1 {
    let train_labels: Vec<Vec<String>> = train.documents.iter().map(|d| d.labels.clone()).collect();
    let test_labels: Vec<Vec<String>> = test.documents.iter().map(|d| d.labels.clone()).collect();
    let r = classify_crosslingual(train_theta, &train_labels, test_theta, &test_labels, cfg);
    DirectionF1 {
        train_language: train.language.clone(),
        test_language: test.language.clone(),
        f1_micro: r.f1_micro,
        majority_f1: r.majority_f1,
    }
}

/// Note attached to every report that includes classification scores.
pub const CLASSIFIER_NOTE: &str =
    "one-vs-rest L2 logistic regression, used in place of a linear SVM";
