//! Bilingual dictionaries indexed against two vocabularies.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// A translation pair. `word1` is in the first language, `word2` in the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Concept {
    pub concept_id: u32,
    pub word1: u32,
    pub word2: u32,
}

impl Concept {
    pub fn word(&self, side: usize) -> u32 {
        if side == 0 {
            self.word1
        } else {
            self.word2
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BilingualDictionary {
    concepts: Vec<Concept>,
    by_word1: Vec<Vec<u32>>,
    by_word2: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DictionaryReport {
    pub retained: usize,
    pub dropped_oov: usize,
    pub dropped_multiword: usize,
    pub duplicates: usize,
}

impl BilingualDictionary {
    /// Builds a dictionary from `(word1, word2)` id pairs. Duplicates collapse
    /// to one concept; first occurrence fixes the concept order.
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (u32, u32)>,
        vocab1_len: usize,
        vocab2_len: usize,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut concepts = Vec::new();
        for (w1, w2) in pairs {
            if w1 as usize >= vocab1_len {
                return Err(Error::IndexOutOfRange {
                    index: w1 as usize,
                    len: vocab1_len,
                });
            }
            if w2 as usize >= vocab2_len {
                return Err(Error::IndexOutOfRange {
                    index: w2 as usize,
                    len: vocab2_len,
                });
            }
            if seen.insert((w1, w2)) {
                concepts.push(Concept {
                    concept_id: concepts.len() as u32,
                    word1: w1,
                    word2: w2,
                });
            }
        }
        Ok(Self::index(concepts, vocab1_len, vocab2_len))
    }

    fn index(concepts: Vec<Concept>, vocab1_len: usize, vocab2_len: usize) -> Self {
        let mut by_word1 = vec![Vec::new(); vocab1_len];
        let mut by_word2 = vec![Vec::new(); vocab2_len];
        for c in &concepts {
            by_word1[c.word1 as usize].push(c.concept_id);
            by_word2[c.word2 as usize].push(c.concept_id);
        }
        Self {
            concepts,
            by_word1,
            by_word2,
        }
    }

    pub fn empty(vocab1_len: usize, vocab2_len: usize) -> Self {
        Self::index(Vec::new(), vocab1_len, vocab2_len)
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn vocab_len(&self, side: usize) -> usize {
        if side == 0 {
            self.by_word1.len()
        } else {
            self.by_word2.len()
        }
    }

    /// Concept ids that contain `word` on `side` (0 or 1).
    pub fn concepts_of(&self, side: usize, word: u32) -> &[u32] {
        let index = if side == 0 { &self.by_word1 } else { &self.by_word2 };
        index.get(word as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Uniform sample of `ceil(fraction * len)` concepts without replacement.
    /// Retained concepts keep their relative order and are renumbered densely.
    pub fn subsample(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Config(format!(
                "dictionary fraction {fraction} not in (0, 1]"
            )));
        }
        let n = self.concepts.len();
        let keep = ceil_fraction(fraction, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, n, keep).into_vec();
        picked.sort_unstable();
        let concepts = picked
            .into_iter()
            .enumerate()
            .map(|(i, old)| Concept {
                concept_id: i as u32,
                ..self.concepts[old]
            })
            .collect();
        Ok(Self::index(concepts, self.by_word1.len(), self.by_word2.len()))
    }

    pub fn write_tsv(&self, path: &Path, v1: &Vocabulary, v2: &Vocabulary) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for c in &self.concepts {
            let a = v1.word(c.word1).ok_or(Error::IndexOutOfRange {
                index: c.word1 as usize,
                len: v1.len(),
            })?;
            let b = v2.word(c.word2).ok_or(Error::IndexOutOfRange {
                index: c.word2 as usize,
                len: v2.len(),
            })?;
            writeln!(w, "{a}\t{b}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// `ceil(fraction * n)`, tolerant of floating-point noise in the product.
pub fn ceil_fraction(fraction: f64, n: usize) -> usize {
    let exact = fraction * n as f64;
    let rounded = exact.round();
    let k = if (exact - rounded).abs() < 1e-9 {
        rounded
    } else {
        exact.ceil()
    };
    (k.max(0.0) as usize).min(n)
}

/// Reads `word1<TAB>word2` lines; `#` starts a comment line.
pub fn load_dictionary(
    path: &Path,
    v1: &Vocabulary,
    v2: &Vocabulary,
) -> Result<(BilingualDictionary, DictionaryReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut report = DictionaryReport::default();
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Malformed {
                path: path.to_owned(),
                line: i + 1,
                msg: "expected two tab-separated columns".into(),
            });
        }
        if fields.iter().any(|f| f.contains(char::is_whitespace)) {
            report.dropped_multiword += 1;
            continue;
        }
        match (v1.id(fields[0]), v2.id(fields[1])) {
            (Some(a), Some(b)) => pairs.push((a, b)),
            _ => report.dropped_oov += 1,
        }
    }
    let total = pairs.len();
    let dict = BilingualDictionary::from_pairs(pairs, v1.len(), v2.len())?;
    report.duplicates = total - dict.len();
    report.retained = dict.len();
    if dict.is_empty() {
        log::warn!("{}: no dictionary entries survive vocabulary filtering", path.display());
    }
    if report.dropped_oov > 0 {
        log::info!(
            "{}: dropped {} out-of-vocabulary pairs",
            path.display(),
            report.dropped_oov
        );
    }
    Ok((dict, report))
}
