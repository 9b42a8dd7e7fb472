//! Transfer distributions: sparse row-stochastic matrices giving, for each
//! target-language document, a distribution over source-language documents.
//!
//! Rows are built from dictionary overlap between document pairs, then
//! optionally sparsified by a focal threshold or sharpened by annealing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::dictionary::BilingualDictionary;
use crate::error::{Error, Result};

/// How the numerator of the overlap score is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapCount {
    /// Number of dictionary pairs with one side in each document.
    #[default]
    Pairs,
    /// Smaller of the two per-language counts of word types that take part
    /// in at least one found pair.
    MatchedTypes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    /// Corpus side (0 or 1) whose documents index the rows.
    pub target_side: usize,
    pub num_sources: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    DocWise,
    CorpusWise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusConfig {
    pub threshold: f64,
    pub scope: Scope,
}

impl FocusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "focal threshold {} not in [0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnealSchedule {
    #[default]
    None,
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    pub schedule: AnnealSchedule,
    pub temperature: f64,
    pub interval: usize,
    pub stop_iteration: usize,
    /// Adaptive mode: evaluate the language identification score every this
    /// many iterations.
    pub lis_every: usize,
    pub lis_folds: usize,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            schedule: AnnealSchedule::None,
            temperature: 0.9,
            interval: 10,
            stop_iteration: 400,
            lis_every: 1,
            lis_folds: 5,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature <= 1.0) {
            return Err(Error::Config(format!(
                "temperature {} not in (0, 1]",
                self.temperature
            )));
        }
        if self.interval == 0 || self.lis_every == 0 {
            return Err(Error::Config("anneal interval and lis_every must be >= 1".into()));
        }
        if self.lis_folds < 2 {
            return Err(Error::Config("lis_folds must be >= 2".into()));
        }
        Ok(())
    }
}

impl TransferMatrix {
    pub fn empty(target_side: usize, num_targets: usize, num_sources: usize) -> Self {
        Self {
            target_side,
            num_sources,
            rows: vec![Vec::new(); num_targets],
        }
    }

    /// Wraps explicit rows; each row is sorted by source index and checked.
    pub fn from_rows(
        target_side: usize,
        num_sources: usize,
        mut rows: Vec<Vec<(u32, f64)>>,
    ) -> Result<Self> {
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
        }
        let m = Self {
            target_side,
            num_sources,
            rows,
        };
        m.validate()?;
        Ok(m)
    }

    /// One-hot rows from `(target, source)` links; other rows empty.
    pub fn indicator(
        target_side: usize,
        num_targets: usize,
        num_sources: usize,
        links: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut rows = vec![Vec::new(); num_targets];
        for (t, s) in links {
            if t >= num_targets {
                return Err(Error::IndexOutOfRange {
                    index: t,
                    len: num_targets,
                });
            }
            rows[t] = vec![(s as u32, 1.0)];
        }
        Self::from_rows(target_side, num_sources, rows)
    }

    pub fn rows(&self) -> &[Vec<(u32, f64)>] {
        &self.rows
    }

    pub fn row(&self, target: usize) -> &[(u32, f64)] {
        &self.rows[target]
    }

    pub fn num_targets(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (t, row) in self.rows.iter().enumerate() {
            let mut sum = 0.0;
            for (i, &(s, w)) in row.iter().enumerate() {
                if s as usize >= self.num_sources {
                    return Err(Error::IndexOutOfRange {
                        index: s as usize,
                        len: self.num_sources,
                    });
                }
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::Internal(format!("row {t}: invalid weight {w}")));
                }
                if i > 0 && row[i - 1].0 >= s {
                    return Err(Error::Internal(format!("row {t}: duplicate source {s}")));
                }
                sum += w;
            }
            if !row.is_empty() && (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Internal(format!("row {t} sums to {sum}")));
            }
        }
        Ok(())
    }

    /// `(number of nonempty rows, mean of their maximum weights)`.
    pub fn stats(&self) -> (usize, f64) {
        let maxima: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| !r.is_empty())
            .map(|r| r.iter().map(|e| e.1).fold(0.0, f64::max))
            .collect();
        let mean = if maxima.is_empty() {
            0.0
        } else {
            maxima.iter().sum::<f64>() / maxima.len() as f64
        };
        (maxima.len(), mean)
    }

    /// Writes `target_id<TAB>source_id<TAB>weight`, by target then
    /// descending weight.
    pub fn write_tsv(&self, path: &Path, target: &Corpus, source: &Corpus) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (t, row) in self.rows.iter().enumerate() {
            let mut sorted = row.clone();
            sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (s, weight) in sorted {
                writeln!(
                    w,
                    "{}\t{}\t{}",
                    target.documents[t].doc_id, source.documents[s as usize].doc_id, weight
                )
                .map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path, target_side: usize, target: &Corpus, source: &Corpus) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let target_index: std::collections::HashMap<&str, usize> = target
            .documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.as_str(), i))
            .collect();
        let source_index: std::collections::HashMap<&str, usize> = source
            .documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.as_str(), i))
            .collect();
        let mut rows = vec![Vec::new(); target.num_docs()];
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let malformed = |msg: &str| Error::Malformed {
                path: path.to_owned(),
                line: i + 1,
                msg: msg.to_owned(),
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(malformed("expected three columns"));
            }
            let t = *target_index.get(f[0]).ok_or_else(|| malformed("unknown target doc"))?;
            let s = *source_index.get(f[1]).ok_or_else(|| malformed("unknown source doc"))?;
            let w: f64 = f[2].parse().map_err(|_| malformed("bad weight"))?;
            rows[t].push((s as u32, w));
        }
        Self::from_rows(target_side, source.num_docs(), rows)
    }
}

/// Dictionary-overlap transfer distributions for every `target` document
/// over `source` documents. `target_side` says which dictionary side the
/// target corpus is on.
///
/// Only pairs sharing at least one dictionary pair are scored, through an
/// inverted index from source word types to documents.
pub fn build_transfer_matrix(
    target: &Corpus,
    source: &Corpus,
    dict: &BilingualDictionary,
    target_side: usize,
    count: OverlapCount,
) -> TransferMatrix {
    let source_side = 1 - target_side;
    let source_types: Vec<Vec<u32>> = source.documents.iter().map(|d| d.types()).collect();
    let mut postings: Vec<Vec<u32>> = vec![Vec::new(); source.vocabulary.len()];
    for (d, types) in source_types.iter().enumerate() {
        for &w in types {
            postings[w as usize].push(d as u32);
        }
    }
    let n_src = source.num_docs();

    let rows: Vec<Vec<(u32, f64)>> = target
        .documents
        .par_iter()
        .map_init(
            || (vec![0u32; n_src], Vec::<u32>::new(), Vec::<(u32, u32, u32)>::new()),
            |(acc, touched, hits), doc| {
                let types = doc.types();
                for &wt in &types {
                    for &c in dict.concepts_of(target_side, wt) {
                        let ws = dict.concepts()[c as usize].word(source_side);
                        for &d in postings.get(ws as usize).map(Vec::as_slice).unwrap_or(&[]) {
                            if acc[d as usize] == 0 {
                                touched.push(d);
                            }
                            acc[d as usize] += 1;
                            if count == OverlapCount::MatchedTypes {
                                hits.push((d, ws, wt));
                            }
                        }
                    }
                }
                touched.sort_unstable();
                if count == OverlapCount::MatchedTypes {
                    matched_type_counts(hits, acc);
                }
                let mut row: Vec<(u32, f64)> = touched
                    .iter()
                    .map(|&d| {
                        let union = (source_types[d as usize].len() + types.len()) as f64;
                        (d, acc[d as usize] as f64 / union)
                    })
                    .collect();
                for &d in touched.iter() {
                    acc[d as usize] = 0;
                }
                touched.clear();
                hits.clear();
                normalize(&mut row);
                row
            },
        )
        .collect();

    TransferMatrix {
        target_side,
        num_sources: n_src,
        rows,
    }
}

fn matched_type_counts(hits: &mut [(u32, u32, u32)], acc: &mut [u32]) {
    hits.sort_unstable();
    let mut i = 0;
    while i < hits.len() {
        let d = hits[i].0;
        let mut j = i;
        while j < hits.len() && hits[j].0 == d {
            j += 1;
        }
        let group = &hits[i..j];
        let mut src: Vec<u32> = group.iter().map(|h| h.1).collect();
        let mut tgt: Vec<u32> = group.iter().map(|h| h.2).collect();
        src.sort_unstable();
        src.dedup();
        tgt.sort_unstable();
        tgt.dedup();
        acc[d as usize] = src.len().min(tgt.len()) as u32;
        i = j;
    }
}

fn normalize(row: &mut Vec<(u32, f64)>) {
    row.retain(|e| e.1 > 0.0);
    let sum: f64 = row.iter().map(|e| e.1).sum();
    if sum > 0.0 {
        for e in row.iter_mut() {
            e.1 /= sum;
        }
    }
}

/// Both directions of a bilingual corpus, optionally focused: element `s`
/// has one row per document of side `s`.
pub fn build_transfer_pair(
    corpus: &crate::corpus::BilingualCorpus,
    dict: &BilingualDictionary,
    focus: Option<&FocusConfig>,
    count: OverlapCount,
) -> [TransferMatrix; 2] {
    [0, 1].map(|s| {
        let m = build_transfer_matrix(corpus.side(s), corpus.side(1 - s), dict, s, count);
        match focus {
            Some(f) => static_focus(&m, f),
            None => m,
        }
    })
}

/// Zeroes weights not strictly above `threshold * max` and renormalizes.
/// Rows where nothing is dropped are returned unchanged.
pub fn static_focus(m: &TransferMatrix, cfg: &FocusConfig) -> TransferMatrix {
    let corpus_max = match cfg.scope {
        Scope::CorpusWise => Some(
            m.rows
                .par_iter()
                .map(|r| r.iter().map(|e| e.1).fold(0.0, f64::max))
                .reduce(|| 0.0, f64::max),
        ),
        Scope::DocWise => None,
    };
    let rows = m
        .rows
        .par_iter()
        .map(|row| {
            let max = corpus_max.unwrap_or_else(|| row.iter().map(|e| e.1).fold(0.0, f64::max));
            let cut = cfg.threshold * max;
            if row.iter().all(|e| e.1 > cut) {
                return row.clone();
            }
            let mut kept: Vec<(u32, f64)> = row.iter().copied().filter(|e| e.1 > cut).collect();
            normalize(&mut kept);
            kept
        })
        .collect();
    TransferMatrix {
        target_side: m.target_side,
        num_sources: m.num_sources,
        rows,
    }
}

/// One deterministic-annealing step: each weight raised to `1 / temperature`,
/// then the row renormalized. Argmax and support are preserved: a weight
/// that would underflow is held at the smallest normal `f64`.
pub fn anneal_matrix(m: &TransferMatrix, temperature: f64) -> TransferMatrix {
    if temperature == 1.0 {
        return m.clone();
    }
    let power = 1.0 / temperature;
    let rows = m
        .rows
        .par_iter()
        .map(|row| {
            if row.len() <= 1 {
                return row.clone();
            }
            let max = row.iter().map(|e| e.1).fold(0.0, f64::max);
            let mut out: Vec<(u32, f64)> = row.iter().map(|&(s, w)| (s, (w / max).powf(power).max(f64::MIN_POSITIVE))).collect();
            normalize(&mut out);
            out
        })
        .collect();
    TransferMatrix {
        target_side: m.target_side,
        num_sources: m.num_sources,
        rows,
    }
}
