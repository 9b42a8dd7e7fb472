//! Synthetic bilingual worlds with known topics, for testing.
//!
//! Language `aa` has words `aa_0000 ..`, language `bb` has `bb_0000 ..`. A
//! hidden random bijection pairs every `aa` word with a `bb` word, and each
//! topic gives a word and its translation the same probability. Documents
//! mix topics per the usual LDA generative story, with one dominant topic
//! that also serves as the document's label.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::corpus::{pair_corpora, BilingualCorpus, Corpus, LoaderOptions, RawDocument};
use crate::dictionary::{ceil_fraction, BilingualDictionary};
use crate::error::{Error, Result};
use crate::eval::cnpmi::{RawReferencePair, ReferenceCorpus};

pub const LANGUAGES: [&str; 2] = ["aa", "bb"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub num_topics: usize,
    pub vocab_size: usize,
    pub num_docs: usize,
    pub doc_len: usize,
    /// Fraction of the hidden translation pairs written to the dictionary.
    pub dict_coverage: f64,
    /// Weight of the dominant topic relative to the rest: a document's
    /// proportions are `(1-ε) e_dominant + ε Dir(1)` with `ε = 1/(1+sharpness)`.
    pub topic_sharpness: f64,
    /// Symmetric Dirichlet concentration of the topic-word distributions.
    pub word_concentration: f64,
    /// Fraction of documents that get a linked, comparable partner.
    pub link_fraction: f64,
    pub heldout_docs: usize,
    pub reference_pairs: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_topics: 5,
            vocab_size: 500,
            num_docs: 200,
            doc_len: 50,
            dict_coverage: 0.3,
            topic_sharpness: 20.0,
            word_concentration: 0.2,
            link_fraction: 0.0,
            heldout_docs: 100,
            reference_pairs: 1000,
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_topics == 0 || self.vocab_size == 0 || self.num_docs == 0 || self.doc_len == 0 {
            return Err(Error::Config("synthetic sizes must be positive".into()));
        }
        for (name, v) in [("dict_coverage", self.dict_coverage), ("link_fraction", self.link_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} {v} not in [0, 1]")));
            }
        }
        if !(self.topic_sharpness > 0.0) || !(self.word_concentration > 0.0) {
            return Err(Error::Config("topic_sharpness and word_concentration must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub config: SyntheticConfig,
    pub raw: [Vec<RawDocument>; 2],
    pub corpus: BilingualCorpus,
    /// Dictionary entries as word strings, in file order.
    pub dictionary_pairs: Vec<(String, String)>,
    /// The entries above that survive indexing against the corpus vocabularies.
    pub dictionary: BilingualDictionary,
    /// Ground truth, indexed by generator word id (`aa_0007` is id 7).
    pub phi: [Vec<Vec<f64>>; 2],
    pub theta: [Vec<Vec<f64>>; 2],
    pub heldout_raw: [Vec<RawDocument>; 2],
    pub reference_raw: Vec<RawReferencePair>,
}

fn word_name(side: usize, id: usize) -> String {
    format!("{}_{id:04}", LANGUAGES[side])
}

fn dirichlet<R: Rng + ?Sized>(rng: &mut R, concentration: f64, n: usize) -> Vec<f64> {
    let g = Gamma::new(concentration, 1.0).expect("positive concentration");
    loop {
        let draws: Vec<f64> = (0..n).map(|_| g.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return draws.into_iter().map(|x| x / total).collect();
        }
    }
}

struct Generator {
    rng: ChaCha8Rng,
    cfg: SyntheticConfig,
    word_dists: [Vec<WeightedIndex<f64>>; 2],
}

impl Generator {
    fn theta(&mut self) -> Vec<f64> {
        let k = self.cfg.num_topics;
        let eps = 1.0 / (1.0 + self.cfg.topic_sharpness);
        let dominant = self.rng.random_range(0..k);
        let mix = dirichlet(&mut self.rng, 1.0, k);
        (0..k)
            .map(|t| eps * mix[t] + if t == dominant { 1.0 - eps } else { 0.0 })
            .collect()
    }

    fn tokens(&mut self, side: usize, theta: &[f64]) -> Vec<String> {
        let topics = WeightedIndex::new(theta).expect("valid proportions");
        (0..self.cfg.doc_len)
            .map(|_| {
                let k = topics.sample(&mut self.rng);
                word_name(side, self.word_dists[side][k].sample(&mut self.rng))
            })
            .collect()
    }
}

fn label_of(theta: &[f64]) -> String {
    let k = (0..theta.len())
        .max_by(|&a, &b| theta[a].total_cmp(&theta[b]).then(b.cmp(&a)))
        .expect("at least one topic");
    format!("topic_{k}")
}

fn distinct(mut words: Vec<String>) -> Vec<String> {
    words.sort();
    words.dedup();
    words
}

/// Samples a world deterministically from `cfg.seed`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticWorld> {
    cfg.validate()?;
    let (k, v, d) = (cfg.num_topics, cfg.vocab_size, cfg.num_docs);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut translation: Vec<usize> = (0..v).collect();
    translation.shuffle(&mut rng);
    let phi1: Vec<Vec<f64>> = (0..k).map(|_| dirichlet(&mut rng, cfg.word_concentration, v)).collect();
    let phi2: Vec<Vec<f64>> = phi1
        .iter()
        .map(|row| {
            let mut out = vec![0.0; v];
            for (w, &p) in row.iter().enumerate() {
                out[translation[w]] = p;
            }
            out
        })
        .collect();
    let word_dists = [&phi1, &phi2].map(|phi| {
        phi.iter()
            .map(|row| WeightedIndex::new(row).expect("valid topic"))
            .collect::<Vec<_>>()
    });
    let mut g = Generator {
        rng,
        cfg: *cfg,
        word_dists,
    };

    let linked = ceil_fraction(cfg.link_fraction, d);
    let mut theta: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    let mut raw: [Vec<RawDocument>; 2] = [Vec::new(), Vec::new()];
    for side in 0..2 {
        for doc in 0..d {
            let th = if side == 1 && doc < linked {
                theta[0][doc].clone()
            } else {
                g.theta()
            };
            let tokens = g.tokens(side, &th);
            raw[side].push(RawDocument {
                id: format!("{}-{doc:05}", LANGUAGES[side]),
                lang: LANGUAGES[side].into(),
                tokens,
                labels: Some(vec![label_of(&th)]),
                link: (doc < linked).then(|| format!("link-{doc:05}")),
            });
            theta[side].push(th);
        }
    }

    let mut heldout_raw: [Vec<RawDocument>; 2] = [Vec::new(), Vec::new()];
    for side in 0..2 {
        for doc in 0..cfg.heldout_docs {
            let th = g.theta();
            let tokens = g.tokens(side, &th);
            heldout_raw[side].push(RawDocument {
                id: format!("{}-test-{doc:05}", LANGUAGES[side]),
                lang: LANGUAGES[side].into(),
                tokens,
                labels: Some(vec![label_of(&th)]),
                link: None,
            });
        }
    }

    let reference_raw = (0..cfg.reference_pairs)
        .map(|_| {
            let th = g.theta();
            RawReferencePair {
                l1_types: distinct(g.tokens(0, &th)),
                l2_types: distinct(g.tokens(1, &th)),
            }
        })
        .collect();

    let mut picked = rand::seq::index::sample(&mut g.rng, v, ceil_fraction(cfg.dict_coverage, v)).into_vec();
    picked.sort_unstable();
    let dictionary_pairs: Vec<(String, String)> = picked
        .into_iter()
        .map(|w| (word_name(0, w), word_name(1, translation[w])))
        .collect();

    let c1 = Corpus::from_raw(LANGUAGES[0], raw[0].clone(), &LoaderOptions::unfiltered())?;
    let c2 = Corpus::from_raw(LANGUAGES[1], raw[1].clone(), &LoaderOptions::unfiltered())?;
    let (corpus, _) = pair_corpora(c1, c2)?;
    let dictionary = index_pairs(&dictionary_pairs, &corpus)?;
    Ok(SyntheticWorld {
        config: *cfg,
        raw,
        corpus,
        dictionary_pairs,
        dictionary,
        phi: [phi1, phi2],
        theta,
        heldout_raw,
        reference_raw,
    })
}

fn index_pairs(pairs: &[(String, String)], corpus: &BilingualCorpus) -> Result<BilingualDictionary> {
    let v1 = &corpus.side1.vocabulary;
    let v2 = &corpus.side2.vocabulary;
    BilingualDictionary::from_pairs(
        pairs.iter().filter_map(|(a, b)| Some((v1.id(a)?, v2.id(b)?))),
        v1.len(),
        v2.len(),
    )
}

impl SyntheticWorld {
    /// Reference pairs encoded against the training vocabularies.
    pub fn reference(&self) -> Result<ReferenceCorpus> {
        let v1 = &self.corpus.side1.vocabulary;
        let v2 = &self.corpus.side2.vocabulary;
        let pairs: Vec<(Vec<u32>, Vec<u32>)> = self
            .reference_raw
            .iter()
            .map(|p| {
                (
                    p.l1_types.iter().filter_map(|w| v1.id(w)).collect(),
                    p.l2_types.iter().filter_map(|w| v2.id(w)).collect(),
                )
            })
            .collect();
        ReferenceCorpus::from_pairs(&pairs, [v1.len(), v2.len()])
    }

    /// Held-out documents of `side`, encoded against the training vocabulary.
    pub fn heldout(&self, side: usize) -> Result<Corpus> {
        Corpus::encode_with(self.heldout_raw[side].clone(), &self.corpus.side(side).vocabulary, true)
    }

    /// Dictionary restricted to a subsample of its entries.
    pub fn dictionary_fraction(&self, fraction: f64, seed: u64) -> Result<BilingualDictionary> {
        self.dictionary.subsample(fraction, seed)
    }
}
