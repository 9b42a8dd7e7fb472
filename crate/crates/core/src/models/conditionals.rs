//! Per-token full conditionals. Every function expects the token's current
//! assignment to be removed from all counts already.
//!
//! The sampler and these functions share one numeric path, so reductions
//! between models (empty priors, indicator rows, empty dictionaries) hold
//! bit for bit rather than merely to rounding.

use crate::error::{Error, Result};
use crate::models::state::{CountState, Hyperparams, SideCounts};
use crate::models::tree::DirichletTree;

/// What, besides the document's own counts, enters the document term.
#[derive(Clone, Copy)]
pub(crate) enum DocExtra<'a> {
    None,
    /// Integer counts of a linked partner document, added before the prior.
    Partner(&'a [u32]),
    /// Pooled counts of a linked pair, used instead of the own counts.
    Pooled(&'a [u32]),
    /// Real-valued transfer pseudo-counts.
    Prior(&'a [f64]),
}

/// Writes `n_{k|d} + extra_k + alpha` for every topic.
pub(crate) fn fill_doc_term(own: &[u32], extra: DocExtra, alpha: f64, out: &mut [f64]) {
    match extra {
        DocExtra::None => {
            for (o, &n) in out.iter_mut().zip(own) {
                *o = n as f64 + alpha;
            }
        }
        DocExtra::Partner(p) => {
            for ((o, &n), &m) in out.iter_mut().zip(own).zip(p) {
                *o = (n + m) as f64 + alpha;
            }
        }
        DocExtra::Pooled(g) => {
            for (o, &n) in out.iter_mut().zip(g) {
                *o = n as f64 + alpha;
            }
        }
        DocExtra::Prior(p) => {
            for ((o, &n), &q) in out.iter_mut().zip(own).zip(p) {
                *o = (n as f64 + q) + alpha;
            }
        }
    }
}

/// Writes `(n_{w|k} + beta) / (n_{.|k} + V beta)` for every topic.
pub(crate) fn fill_flat_word_term(counts: &SideCounts, word: u32, beta: f64, out: &mut Vec<f64>) {
    let v_beta = counts.vocab_size as f64 * beta;
    out.clear();
    out.extend(
        counts
            .word_row(word)
            .iter()
            .zip(&counts.n_topic_total)
            .map(|(&n, &t)| (n as f64 + beta) / (t as f64 + v_beta)),
    );
}

fn check_token(counts: &SideCounts, doc: usize, pos: usize) -> Result<u32> {
    let tokens = counts.tokens.get(doc).ok_or(Error::IndexOutOfRange {
        index: doc,
        len: counts.num_docs(),
    })?;
    tokens.get(pos).copied().ok_or(Error::IndexOutOfRange {
        index: pos,
        len: tokens.len(),
    })
}

fn check_len(v: usize, k: usize) -> Result<()> {
    if v != k {
        return Err(Error::IndexOutOfRange { index: v, len: k });
    }
    Ok(())
}

fn normalize(mut w: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Internal(format!("conditional has invalid mass {total}")));
    }
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

fn flat_conditional(counts: &SideCounts, doc: usize, pos: usize, extra: DocExtra, hp: &Hyperparams) -> Result<Vec<f64>> {
    let w = check_token(counts, doc, pos)?;
    let mut doc_term = vec![0.0; counts.num_topics];
    fill_doc_term(counts.doc_row(doc), extra, hp.alpha, &mut doc_term);
    let mut word = Vec::with_capacity(counts.num_topics);
    fill_flat_word_term(counts, w, hp.beta, &mut word);
    normalize(doc_term.iter().zip(&word).map(|(a, b)| a * b).collect())
}

/// `p(k) ∝ (n_{k|d} + α)(n_{w|k} + β)/(n_{·|k} + Vβ)`.
pub fn lda_conditional(counts: &SideCounts, doc: usize, pos: usize, hp: &Hyperparams) -> Result<Vec<f64>> {
    flat_conditional(counts, doc, pos, DocExtra::None, hp)
}

/// HardLink, conditional view: the linked partner's counts join the
/// document's own. Pass zeros for an unlinked document.
pub fn hardlink_conditional(
    counts: &SideCounts,
    doc: usize,
    pos: usize,
    partner_counts: &[u32],
    hp: &Hyperparams,
) -> Result<Vec<f64>> {
    check_len(partner_counts.len(), counts.num_topics)?;
    flat_conditional(counts, doc, pos, DocExtra::Partner(partner_counts), hp)
}

/// HardLink, joint view: the linked pair shares one topic-count table
/// `pooled_counts` and one θ.
pub fn hardlink_joint_conditional(
    counts: &SideCounts,
    doc: usize,
    pos: usize,
    pooled_counts: &[u32],
    hp: &Hyperparams,
) -> Result<Vec<f64>> {
    check_len(pooled_counts.len(), counts.num_topics)?;
    flat_conditional(counts, doc, pos, DocExtra::Pooled(pooled_counts), hp)
}

/// Transfer pseudo-counts `Σ_s δ(s) N[s]` for one target document.
pub fn softlink_prior(row: &[(u32, f64)], source: &SideCounts) -> Result<Vec<f64>> {
    let mut out = vec![0.0; source.num_topics];
    add_softlink_prior(row, source, &mut out)?;
    Ok(out)
}

pub(crate) fn add_softlink_prior(row: &[(u32, f64)], source: &SideCounts, out: &mut [f64]) -> Result<()> {
    for &(s, weight) in row {
        if s as usize >= source.num_docs() {
            return Err(Error::IndexOutOfRange {
                index: s as usize,
                len: source.num_docs(),
            });
        }
        for (o, &n) in out.iter_mut().zip(source.doc_row(s as usize)) {
            *o += weight * n as f64;
        }
    }
    Ok(())
}

pub fn softlink_conditional(
    counts: &SideCounts,
    doc: usize,
    pos: usize,
    prior_pseudo: &[f64],
    hp: &Hyperparams,
) -> Result<Vec<f64>> {
    check_len(prior_pseudo.len(), counts.num_topics)?;
    flat_conditional(counts, doc, pos, DocExtra::Prior(prior_pseudo), hp)
}

/// Joint distribution over `(leaf, topic)` for a token of `side` under the
/// tree prior, laid out leaf-major. Returns the candidate leaves alongside;
/// the leaf list is empty for a word attached to the root.
pub fn voclink_path_conditional(
    state: &CountState,
    tree: &DirichletTree,
    side: usize,
    doc: usize,
    pos: usize,
    prior_pseudo: Option<&[f64]>,
    hp: &Hyperparams,
) -> Result<(Vec<u32>, Vec<f64>)> {
    let counts = &state.sides[side];
    let w = check_token(counts, doc, pos)?;
    let kk = counts.num_topics;
    let extra = match prior_pseudo {
        Some(p) => {
            check_len(p.len(), kk)?;
            DocExtra::Prior(p)
        }
        None => DocExtra::None,
    };
    let mut doc_term = vec![0.0; kk];
    fill_doc_term(counts.doc_row(doc), extra, hp.alpha, &mut doc_term);
    let mut word = Vec::new();
    tree.fill_word_weights(side, w, counts, hp, &mut word);
    for (i, x) in word.iter_mut().enumerate() {
        *x *= doc_term[i % kk];
    }
    Ok((tree.leaves(side, w).to_vec(), normalize(word)?))
}

/// Topic marginal of [`voclink_path_conditional`]: mass summed over leaves.
pub fn voclink_conditional(
    state: &CountState,
    tree: &DirichletTree,
    side: usize,
    doc: usize,
    pos: usize,
    hp: &Hyperparams,
) -> Result<Vec<f64>> {
    let (_, joint) = voclink_path_conditional(state, tree, side, doc, pos, None, hp)?;
    let kk = state.num_topics;
    let mut out = vec![0.0; kk];
    for (i, p) in joint.iter().enumerate() {
        out[i % kk] += p;
    }
    Ok(out)
}
