//! Crosslingual NPMI against a parallel reference corpus.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::models::TopicModel;

/// One line of a reference file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawReferencePair {
    pub l1_types: Vec<String>,
    pub l2_types: Vec<String>,
}

/// Aligned document pairs, stored as postings: for each word of each
/// language, the sorted list of pairs that contain it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCorpus {
    num_pairs: usize,
    postings: [Vec<Vec<u32>>; 2],
}

impl ReferenceCorpus {
    /// Builds from per-pair word-type lists over vocabularies of sizes
    /// `vocab_sizes`. Repeated types within a side count once.
    pub fn from_pairs(pairs: &[(Vec<u32>, Vec<u32>)], vocab_sizes: [usize; 2]) -> Result<Self> {
        let mut postings = [vec![Vec::new(); vocab_sizes[0]], vec![Vec::new(); vocab_sizes[1]]];
        for (r, (a, b)) in pairs.iter().enumerate() {
            for (side, types) in [a, b].into_iter().enumerate() {
                for &w in types {
                    let list = postings[side].get_mut(w as usize).ok_or(Error::IndexOutOfRange {
                        index: w as usize,
                        len: vocab_sizes[side],
                    })?;
                    if list.last() != Some(&(r as u32)) {
                        list.push(r as u32);
                    }
                }
            }
        }
        Ok(Self {
            num_pairs: pairs.len(),
            postings,
        })
    }

    pub fn len(&self) -> usize {
        self.num_pairs
    }

    pub fn is_empty(&self) -> bool {
        self.num_pairs == 0
    }

    /// Number of pairs whose `side` document contains `word`.
    pub fn doc_freq(&self, side: usize, word: u32) -> usize {
        self.postings[side].get(word as usize).map_or(0, Vec::len)
    }

    /// Number of pairs with `w1` in the first document and `w2` in the second.
    pub fn joint_freq(&self, w1: u32, w2: u32) -> usize {
        let (Some(a), Some(b)) = (self.postings[0].get(w1 as usize), self.postings[1].get(w2 as usize)) else {
            return 0;
        };
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Reads a JSON-lines reference file. Types outside the vocabularies are
    /// ignored; a pair with an empty side is malformed.
    pub fn load(path: &Path, v1: &Vocabulary, v2: &Vocabulary) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |msg: String| Error::Malformed {
                path: path.to_owned(),
                line: i + 1,
                msg,
            };
            let raw: RawReferencePair = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            if raw.l1_types.is_empty() || raw.l2_types.is_empty() {
                return Err(malformed("reference pair with an empty side".into()));
            }
            let a = raw.l1_types.iter().filter_map(|w| v1.id(w)).collect();
            let b = raw.l2_types.iter().filter_map(|w| v2.id(w)).collect();
            pairs.push((a, b));
        }
        if pairs.is_empty() {
            return Err(Error::EmptyCorpus(path.display().to_string()));
        }
        for (side, v) in [v1, v2].into_iter().enumerate() {
            let known = |p: &(Vec<u32>, Vec<u32>)| if side == 0 { !p.0.is_empty() } else { !p.1.is_empty() };
            if !pairs.iter().any(known) {
                return Err(Error::VocabularyMismatch(format!(
                    "{}: no reference word is in the {} vocabulary",
                    path.display(),
                    v.language()
                )));
            }
        }
        Self::from_pairs(&pairs, [v1.len(), v2.len()])
    }
}

pub fn write_reference(path: &Path, pairs: &[RawReferencePair]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in pairs {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// The `c` most probable word ids, ties broken by ascending id.
pub fn top_words(phi_row: &[f64], c: usize) -> Vec<u32> {
    let mut ids: Vec<u32> = (0..phi_row.len() as u32).collect();
    ids.sort_by(|&a, &b| phi_row[b as usize].total_cmp(&phi_row[a as usize]).then(a.cmp(&b)));
    ids.truncate(c);
    ids
}

/// NPMI from counts over `r` pairs. Never-co-occurring words score -1 and
/// words absent from the reference score 0.
pub fn npmi(joint: usize, freq1: usize, freq2: usize, r: usize) -> f64 {
    if freq1 == 0 || freq2 == 0 {
        return 0.0;
    }
    if joint == 0 {
        return -1.0;
    }
    if joint == r {
        return 1.0;
    }
    let n = r as f64;
    let lj = (joint as f64 / n).ln();
    let l1 = (freq1 as f64 / n).ln();
    let l2 = (freq2 as f64 / n).ln();
    ((lj - l1 - l2) / -lj).clamp(-1.0, 1.0)
}

/// Mean NPMI over all cross-language pairs of the two top-word lists.
pub fn cnpmi_topic(words1: &[u32], words2: &[u32], reference: &ReferenceCorpus) -> Result<f64> {
    if words1.is_empty() || words2.is_empty() {
        return Err(Error::Config("top-word lists must be nonempty".into()));
    }
    if reference.is_empty() {
        return Err(Error::EmptyCorpus("reference".into()));
    }
    let r = reference.len();
    let mut total = 0.0;
    for &a in words1 {
        let fa = reference.doc_freq(0, a);
        for &b in words2 {
            total += npmi(reference.joint_freq(a, b), fa, reference.doc_freq(1, b), r);
        }
    }
    Ok(total / (words1.len() * words2.len()) as f64)
}

/// Per-topic CNPMI using each side's top `c` words, and their mean.
pub fn cnpmi_model(model: &TopicModel, reference: &ReferenceCorpus, c: usize) -> Result<(Vec<f64>, f64)> {
    let k = model.num_topics();
    let per_topic = (0..k)
        .into_par_iter()
        .map(|t| {
            let w1 = top_words(&model.side(0).phi[t], c);
            let w2 = top_words(&model.side(1).phi[t], c);
            cnpmi_topic(&w1, &w2, reference)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_topic.iter().sum::<f64>() / k as f64;
    Ok((per_topic, mean))
}
