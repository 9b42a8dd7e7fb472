use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric Dirichlet priors and run lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub num_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Tree prior on root-to-concept edges.
    pub beta_root: f64,
    /// Tree prior on concept-to-leaf edges.
    pub beta_internal: f64,
    pub train_iterations: usize,
    pub infer_iterations: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            num_topics: 25,
            alpha: 0.1,
            beta: 0.01,
            beta_root: 0.01,
            beta_internal: 100.0,
            train_iterations: 1000,
            infer_iterations: 500,
            seed: 1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.num_topics < 2 {
            return Err(Error::Config("num_topics must be >= 2".into()));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("beta_root", self.beta_root),
            ("beta_internal", self.beta_internal),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Count tables of one language for the collapsed sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideCounts {
    pub num_topics: usize,
    pub vocab_size: usize,
    pub tokens: Vec<Vec<u32>>,
    /// Topic of every token, aligned with `tokens`.
    pub z: Vec<Vec<u32>>,
    /// `D x K`, row-major: tokens of document d assigned to topic k.
    pub n_topic_doc: Vec<u32>,
    /// `V x K`, row-major: tokens of word w assigned to topic k.
    pub n_word_topic: Vec<u32>,
    /// Tokens assigned to topic k.
    pub n_topic_total: Vec<u32>,
}

impl SideCounts {
    /// Tallies counts from explicit assignments.
    pub fn from_assignments(
        tokens: Vec<Vec<u32>>,
        z: Vec<Vec<u32>>,
        vocab_size: usize,
        num_topics: usize,
    ) -> Result<Self> {
        if tokens.len() != z.len() {
            return Err(Error::Internal("assignments do not cover every document".into()));
        }
        let mut s = Self {
            num_topics,
            vocab_size,
            n_topic_doc: vec![0; tokens.len() * num_topics],
            n_word_topic: vec![0; vocab_size * num_topics],
            n_topic_total: vec![0; num_topics],
            tokens,
            z,
        };
        for d in 0..s.tokens.len() {
            if s.tokens[d].len() != s.z[d].len() {
                return Err(Error::Internal(format!("document {d}: assignment length mismatch")));
            }
            for i in 0..s.tokens[d].len() {
                let (w, k) = (s.tokens[d][i], s.z[d][i]);
                if w as usize >= vocab_size {
                    return Err(Error::IndexOutOfRange {
                        index: w as usize,
                        len: vocab_size,
                    });
                }
                if k as usize >= num_topics {
                    return Err(Error::IndexOutOfRange {
                        index: k as usize,
                        len: num_topics,
                    });
                }
                s.increment(d, w, k as usize);
            }
        }
        Ok(s)
    }

    pub fn num_docs(&self) -> usize {
        self.tokens.len()
    }

    pub fn doc_row(&self, doc: usize) -> &[u32] {
        &self.n_topic_doc[doc * self.num_topics..(doc + 1) * self.num_topics]
    }

    pub fn word_row(&self, word: u32) -> &[u32] {
        let w = word as usize;
        &self.n_word_topic[w * self.num_topics..(w + 1) * self.num_topics]
    }

    /// Adds one token of `word` in topic `k` to document `doc`; `z` is untouched.
    pub fn increment(&mut self, doc: usize, word: u32, k: usize) {
        let kk = self.num_topics;
        self.n_topic_doc[doc * kk + k] += 1;
        self.n_word_topic[word as usize * kk + k] += 1;
        self.n_topic_total[k] += 1;
    }

    /// Removes one token of `word` in topic `k` from document `doc`; `z` is untouched.
    pub fn decrement(&mut self, doc: usize, word: u32, k: usize) -> Result<()> {
        let kk = self.num_topics;
        let cells = [
            doc * kk + k,
            word as usize * kk + k,
        ];
        if self.n_topic_doc[cells[0]] == 0
            || self.n_word_topic[cells[1]] == 0
            || self.n_topic_total[k] == 0
        {
            return Err(Error::Internal(format!(
                "negative count removing word {word} topic {k} from document {doc}"
            )));
        }
        self.n_topic_doc[cells[0]] -= 1;
        self.n_word_topic[cells[1]] -= 1;
        self.n_topic_total[k] -= 1;
        Ok(())
    }

    /// Reassigns token `pos` of `doc` and keeps the tables in sync.
    pub fn set_topic(&mut self, doc: usize, pos: usize, k: u32) -> Result<()> {
        let w = self.tokens[doc][pos];
        let old = self.z[doc][pos];
        self.decrement(doc, w, old as usize)?;
        self.z[doc][pos] = k;
        self.increment(doc, w, k as usize);
        Ok(())
    }

    /// Verifies the tables are exactly the tallies of `z`.
    pub fn check_consistency(&self) -> Result<()> {
        let fresh = Self::from_assignments(
            self.tokens.clone(),
            self.z.clone(),
            self.vocab_size,
            self.num_topics,
        )?;
        if fresh.n_topic_doc != self.n_topic_doc
            || fresh.n_word_topic != self.n_word_topic
            || fresh.n_topic_total != self.n_topic_total
        {
            return Err(Error::Internal("count tables disagree with assignments".into()));
        }
        Ok(())
    }
}

/// Count tables for both languages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountState {
    pub num_topics: usize,
    pub sides: [SideCounts; 2],
}

impl CountState {
    pub fn new(side1: SideCounts, side2: SideCounts) -> Result<Self> {
        if side1.num_topics != side2.num_topics {
            return Err(Error::Internal("sides disagree on topic count".into()));
        }
        Ok(Self {
            num_topics: side1.num_topics,
            sides: [side1, side2],
        })
    }

    pub fn check_consistency(&self) -> Result<()> {
        self.sides[0].check_consistency()?;
        self.sides[1].check_consistency()
    }
}
