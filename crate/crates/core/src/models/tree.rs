//! Dirichlet tree over the bilingual vocabulary for vocabulary links.
//!
//! Each dictionary concept is an internal node under the root with two
//! leaves, one per language. Words in no concept hang directly off the root.
//! A word in several concepts has one leaf per concept, and the sampler
//! draws the leaf together with the topic.
//!
//! Sampling a token of language `l` treats the other language's counts as
//! pseudo-counts on the shared nodes: the root-to-concept edge and the
//! concept node carry counts pooled over both languages, while the root's
//! other children are `l`'s own untranslated words. With no concepts the
//! word term is the plain per-language `(n_wk + beta) / (n_k + V beta)`.

use serde::{Deserialize, Serialize};

use crate::dictionary::BilingualDictionary;
use crate::error::{Error, Result};
use crate::models::state::{CountState, Hyperparams, SideCounts};

/// Path marker for a token emitted through a root leaf.
pub const ROOT_LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletTree {
    num_topics: usize,
    num_concepts: usize,
    /// Per side, per word: the concepts whose leaf this word is.
    concepts_of_word: [Vec<Vec<u32>>; 2],
    /// Per side: number of words attached directly to the root.
    untranslated: [usize; 2],
    /// Per side, `C x K`: tokens of that side routed through concept c in topic k.
    concept_topic: [Vec<u32>; 2],
    /// Per side, length K: sum of `concept_topic` over concepts.
    concept_total: [Vec<u64>; 2],
    /// Per side, per document, per token: concept id or [`ROOT_LEAF`].
    paths: [Vec<Vec<u32>>; 2],
}

impl DirichletTree {
    /// Builds the tree with all node counts zero and every path unset.
    pub fn new(dict: &BilingualDictionary, num_topics: usize) -> Self {
        let concepts_of_word: [Vec<Vec<u32>>; 2] = [0, 1].map(|side| {
            (0..dict.vocab_len(side))
                .map(|w| dict.concepts_of(side, w as u32).to_vec())
                .collect()
        });
        let untranslated = [0, 1].map(|s| concepts_of_word[s].iter().filter(|c| c.is_empty()).count());
        let c = dict.len();
        Self {
            num_topics,
            num_concepts: c,
            concepts_of_word,
            untranslated,
            concept_topic: [vec![0; c * num_topics], vec![0; c * num_topics]],
            concept_total: [vec![0; num_topics], vec![0; num_topics]],
            paths: [Vec::new(), Vec::new()],
        }
    }

    /// Builds the tree and routes the tokens of `state` along `paths`.
    pub fn with_paths(dict: &BilingualDictionary, state: &CountState, paths: [Vec<Vec<u32>>; 2]) -> Result<Self> {
        let mut tree = Self::new(dict, state.num_topics);
        tree.check_vocab(state)?;
        for side in 0..2 {
            let s = &state.sides[side];
            if paths[side].len() != s.num_docs() {
                return Err(Error::Internal("paths do not cover every document".into()));
            }
            for d in 0..s.num_docs() {
                if paths[side][d].len() != s.tokens[d].len() {
                    return Err(Error::Internal(format!("document {d}: path length mismatch")));
                }
                for (i, &path) in paths[side][d].iter().enumerate() {
                    let w = s.tokens[d][i];
                    let leaves = tree.leaves(side, w);
                    let ok = if leaves.is_empty() {
                        path == ROOT_LEAF
                    } else {
                        leaves.contains(&path)
                    };
                    if !ok {
                        return Err(Error::Internal(format!("word {w} has no leaf under {path}")));
                    }
                }
            }
        }
        tree.paths = paths;
        for side in 0..2 {
            let s = &state.sides[side];
            for d in 0..s.num_docs() {
                for i in 0..s.tokens[d].len() {
                    let path = tree.paths[side][d][i];
                    tree.add_path(side, path, s.z[d][i] as usize);
                }
            }
        }
        Ok(tree)
    }

    fn check_vocab(&self, state: &CountState) -> Result<()> {
        for side in 0..2 {
            if self.concepts_of_word[side].len() != state.sides[side].vocab_size {
                return Err(Error::VocabularyMismatch(format!(
                    "dictionary indexes {} words on side {side}, corpus has {}",
                    self.concepts_of_word[side].len(),
                    state.sides[side].vocab_size
                )));
            }
        }
        Ok(())
    }

    pub fn num_concepts(&self) -> usize {
        self.num_concepts
    }

    /// Concepts through which `word` can be emitted; empty for root leaves.
    pub fn leaves(&self, side: usize, word: u32) -> &[u32] {
        &self.concepts_of_word[side][word as usize]
    }

    pub fn paths(&self) -> &[Vec<Vec<u32>>; 2] {
        &self.paths
    }

    pub fn path(&self, side: usize, doc: usize, pos: usize) -> u32 {
        self.paths[side][doc][pos]
    }

    pub fn concept_count(&self, side: usize, concept: u32, k: usize) -> u32 {
        self.concept_topic[side][concept as usize * self.num_topics + k]
    }

    #[cfg(test)]
    pub(crate) fn set_paths(&mut self, paths: [Vec<Vec<u32>>; 2]) {
        self.paths = paths;
    }

    pub(crate) fn set_path(&mut self, side: usize, doc: usize, pos: usize, path: u32) {
        self.paths[side][doc][pos] = path;
    }

    pub fn add_path(&mut self, side: usize, path: u32, k: usize) {
        if path != ROOT_LEAF {
            self.concept_topic[side][path as usize * self.num_topics + k] += 1;
            self.concept_total[side][k] += 1;
        }
    }

    pub fn remove_path(&mut self, side: usize, path: u32, k: usize) -> Result<()> {
        if path != ROOT_LEAF {
            let cell = &mut self.concept_topic[side][path as usize * self.num_topics + k];
            if *cell == 0 {
                return Err(Error::Internal(format!("negative count at concept {path} topic {k}")));
            }
            *cell -= 1;
            self.concept_total[side][k] -= 1;
        }
        Ok(())
    }

    /// Unnormalized path-product weights for emitting `word` of `side`,
    /// laid out leaf-major: `out[leaf * K + k]`. Root-leaf words produce K
    /// entries. Returns the number of leaves.
    pub(crate) fn fill_word_weights(
        &self,
        side: usize,
        word: u32,
        counts: &SideCounts,
        hp: &Hyperparams,
        out: &mut Vec<f64>,
    ) -> usize {
        let kk = self.num_topics;
        let other = 1 - side;
        let leaves = &self.concepts_of_word[side][word as usize];
        out.clear();
        let root_prior = self.num_concepts as f64 * hp.beta_root + self.untranslated[side] as f64 * hp.beta;
        let root_denominator = |k: usize| {
            counts.n_topic_total[k] as f64 + self.concept_total[other][k] as f64 + root_prior
        };
        if leaves.is_empty() {
            let row = counts.word_row(word);
            for (k, &n) in row.iter().enumerate() {
                out.push((n as f64 + hp.beta) / root_denominator(k));
            }
            return 1;
        }
        for &c in leaves {
            let base = c as usize * kk;
            for k in 0..kk {
                let own = self.concept_topic[side][base + k] as f64;
                let pooled = own + self.concept_topic[other][base + k] as f64;
                let edge = (pooled + hp.beta_root) / root_denominator(k);
                let leaf = (own + hp.beta_internal) / (pooled + 2.0 * hp.beta_internal);
                out.push(edge * leaf);
            }
        }
        leaves.len()
    }

    /// Checks node counts against the token paths and topic assignments.
    pub fn check_consistency(&self, state: &CountState) -> Result<()> {
        let fresh = Self::with_paths(
            &self.dictionary_view(),
            state,
            self.paths.clone(),
        )?;
        if fresh.concept_topic != self.concept_topic || fresh.concept_total != self.concept_total {
            return Err(Error::Internal("tree counts disagree with token paths".into()));
        }
        Ok(())
    }

    fn dictionary_view(&self) -> BilingualDictionary {
        let mut concept_words = vec![(0u32, 0u32); self.num_concepts];
        for side in 0..2 {
            for (w, cs) in self.concepts_of_word[side].iter().enumerate() {
                for &c in cs {
                    if side == 0 {
                        concept_words[c as usize].0 = w as u32;
                    } else {
                        concept_words[c as usize].1 = w as u32;
                    }
                }
            }
        }
        BilingualDictionary::from_pairs(
            concept_words,
            self.concepts_of_word[0].len(),
            self.concepts_of_word[1].len(),
        )
        .expect("tree was built from a valid dictionary")
    }
}
