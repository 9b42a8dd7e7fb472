//! Held-out inference with topics fixed.

use rand::Rng as _;
use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::models::model::TopicModel;
use crate::rng::{inference_stream, sample_index};

/// Samples document-topic assignments for `heldout` with the model's φ
/// frozen, and returns `(n_k + α) / (len + Kα)` per document. The corpus
/// must be encoded against the vocabulary of the model side in its language.
pub fn infer_heldout(model: &TopicModel, heldout: &Corpus, iterations: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let side = model.side_of_language(&heldout.language).ok_or_else(|| {
        Error::VocabularyMismatch(format!("model has no `{}` side", heldout.language))
    })?;
    let sm = model.side(side);
    if sm.vocabulary.as_slice() != heldout.vocabulary.words() {
        return Err(Error::VocabularyMismatch(format!(
            "held-out `{}` corpus is not encoded against the model vocabulary",
            heldout.language
        )));
    }
    let kk = model.num_topics();
    let alpha = model.hyperparams.alpha;
    // Word-major copy of φ so each token reads one contiguous row.
    let v = sm.vocabulary.len();
    let mut phi_wk = vec![0.0; v * kk];
    for (k, row) in sm.phi.iter().enumerate() {
        for (w, &p) in row.iter().enumerate() {
            phi_wk[w * kk + k] = p;
        }
    }
    Ok(heldout
        .documents
        .par_iter()
        .enumerate()
        .map(|(d, doc)| {
            let mut rng = inference_stream(seed, d);
            let mut counts = vec![0u32; kk];
            let mut z: Vec<usize> = doc
                .tokens
                .iter()
                .map(|_| {
                    let k = rng.random_range(0..kk);
                    counts[k] += 1;
                    k
                })
                .collect();
            let mut weights = vec![0.0; kk];
            for _ in 0..iterations {
                for (i, &w) in doc.tokens.iter().enumerate() {
                    counts[z[i]] -= 1;
                    let phi = &phi_wk[w as usize * kk..(w as usize + 1) * kk];
                    let mut total = 0.0;
                    for k in 0..kk {
                        weights[k] = (counts[k] as f64 + alpha) * phi[k];
                        total += weights[k];
                    }
                    let k = sample_index(&mut rng, &weights, total);
                    z[i] = k;
                    counts[k] += 1;
                }
            }
            let denom = doc.tokens.len() as f64 + kk as f64 * alpha;
            counts.iter().map(|&n| (n as f64 + alpha) / denom).collect()
        })
        .collect())
}
