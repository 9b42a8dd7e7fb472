//! Corpus ingestion: JSON-lines documents, vocabulary construction with
//! stopword and frequency filtering, held-out encoding, and hard-link pairing.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CORPUS_FORMAT_VERSION: u32 = 1;

/// Word-type inventory of one language. Ids are dense in `[0, len)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    language: String,
    word_of_id: Vec<String>,
    id_of_word: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new(language: impl Into<String>) -> Self {
        Self {
            language: language.into(),
            word_of_id: Vec::new(),
            id_of_word: HashMap::new(),
        }
    }

    /// Builds a vocabulary from an ordered word list; position is the id.
    pub fn from_words(language: impl Into<String>, words: Vec<String>) -> Result<Self> {
        let mut id_of_word = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if id_of_word.insert(w.clone(), i as u32).is_some() {
                return Err(Error::VocabularyMismatch(format!(
                    "word `{w}` listed twice"
                )));
            }
        }
        Ok(Self {
            language: language.into(),
            word_of_id: words,
            id_of_word,
        })
    }

    /// Returns the id of `word`, inserting it if absent.
    pub fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.id_of_word.get(word) {
            return id;
        }
        let id = self.word_of_id.len() as u32;
        self.word_of_id.push(word.to_owned());
        self.id_of_word.insert(word.to_owned(), id);
        id
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.id_of_word.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.word_of_id.get(id as usize).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.word_of_id
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn len(&self) -> usize {
        self.word_of_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_of_id.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub language: String,
    pub tokens: Vec<u32>,
    pub labels: Vec<String>,
    pub link_id: Option<String>,
}

impl Document {
    /// Distinct word types, ascending.
    pub fn types(&self) -> Vec<u32> {
        let mut t = self.tokens.clone();
        t.sort_unstable();
        t.dedup();
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub language: String,
    pub vocabulary: Vocabulary,
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn num_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn token_total(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }

    pub fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.documents.iter().position(|d| d.doc_id == doc_id)
    }

    /// Builds a training corpus: stopword removal, removal of the
    /// `remove_top_n` most frequent types (by token count, ties by word),
    /// then ids assigned in order of first occurrence.
    pub fn from_raw(
        language: &str,
        raw: Vec<RawDocument>,
        options: &LoaderOptions,
    ) -> Result<Self> {
        check_unique_ids(&raw)?;
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for doc in &raw {
            for t in &doc.tokens {
                if !options.stopwords.contains(t) {
                    *freq.entry(t.as_str()).or_insert(0) += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, u64)> = freq.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let removed: HashSet<String> = ranked
            .iter()
            .take(options.remove_top_n)
            .map(|(w, _)| (*w).to_owned())
            .collect();

        let mut vocabulary = Vocabulary::new(language);
        let mut documents = Vec::with_capacity(raw.len());
        for doc in raw {
            let tokens: Vec<u32> = doc
                .tokens
                .iter()
                .filter(|t| !options.stopwords.contains(*t) && !removed.contains(*t))
                .map(|t| vocabulary.intern(t))
                .collect();
            if tokens.is_empty() && !options.keep_empty {
                return Err(Error::EmptyDocument(doc.id));
            }
            documents.push(doc.into_document(tokens));
        }
        if vocabulary.is_empty() {
            return Err(Error::EmptyCorpus(language.to_owned()));
        }
        Ok(Self {
            language: language.to_owned(),
            vocabulary,
            documents,
        })
    }

    /// Encodes documents against an existing (training) vocabulary,
    /// dropping out-of-vocabulary tokens.
    pub fn encode_with(raw: Vec<RawDocument>, vocabulary: &Vocabulary, keep_empty: bool) -> Result<Self> {
        check_unique_ids(&raw)?;
        let mut documents = Vec::with_capacity(raw.len());
        for doc in raw {
            let tokens: Vec<u32> = doc.tokens.iter().filter_map(|t| vocabulary.id(t)).collect();
            if tokens.is_empty() && !keep_empty {
                return Err(Error::EmptyDocument(doc.id));
            }
            documents.push(doc.into_document(tokens));
        }
        Ok(Self {
            language: vocabulary.language().to_owned(),
            vocabulary: vocabulary.clone(),
            documents,
        })
    }

    /// Converts back to string-token records (the JSON-lines schema).
    pub fn to_raw(&self) -> Vec<RawDocument> {
        self.documents
            .iter()
            .map(|d| RawDocument {
                id: d.doc_id.clone(),
                lang: d.language.clone(),
                tokens: d
                    .tokens
                    .iter()
                    .map(|&t| self.vocabulary.word_of_id[t as usize].clone())
                    .collect(),
                labels: if d.labels.is_empty() {
                    None
                } else {
                    Some(d.labels.clone())
                },
                link: d.link_id.clone(),
            })
            .collect()
    }

    pub fn to_serialized(&self) -> SerializedCorpus {
        SerializedCorpus {
            format_version: CORPUS_FORMAT_VERSION,
            language: self.language.clone(),
            vocabulary: self.vocabulary.words().to_vec(),
            documents: self
                .documents
                .iter()
                .map(|d| SerializedDocument {
                    id: d.doc_id.clone(),
                    tokens: d.tokens.clone(),
                    labels: d.labels.clone(),
                    link: d.link_id.clone(),
                })
                .collect(),
        }
    }

    pub fn from_serialized(s: SerializedCorpus) -> Result<Self> {
        if s.format_version != CORPUS_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported corpus format version {}",
                s.format_version
            )));
        }
        let vocabulary = Vocabulary::from_words(s.language.clone(), s.vocabulary)?;
        let v = vocabulary.len() as u32;
        let mut documents = Vec::with_capacity(s.documents.len());
        for d in s.documents {
            if let Some(&bad) = d.tokens.iter().find(|&&t| t >= v) {
                return Err(Error::IndexOutOfRange {
                    index: bad as usize,
                    len: v as usize,
                });
            }
            documents.push(Document {
                doc_id: d.id,
                language: s.language.clone(),
                tokens: d.tokens,
                labels: d.labels,
                link_id: d.link,
            });
        }
        Ok(Self {
            language: s.language,
            vocabulary,
            documents,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &self.to_serialized())?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_serialized(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let s: SerializedCorpus = serde_json::from_reader(BufReader::new(file))?;
        Self::from_serialized(s)
    }
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub lang: String,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
}

impl RawDocument {
    fn into_document(self, tokens: Vec<u32>) -> Document {
        let labels: BTreeSet<String> = self.labels.unwrap_or_default().into_iter().collect();
        Document {
            doc_id: self.id,
            language: self.lang,
            tokens,
            labels: labels.into_iter().collect(),
            link_id: self.link.filter(|l| !l.is_empty()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerializedDocument {
    pub id: String,
    pub tokens: Vec<u32>,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub link: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerializedCorpus {
    pub format_version: u32,
    pub language: String,
    pub vocabulary: Vec<String>,
    pub documents: Vec<SerializedDocument>,
}

#[derive(Debug, Clone)]
pub struct LoaderOptions {
    pub stopwords: HashSet<String>,
    pub remove_top_n: usize,
    pub keep_empty: bool,
}

impl Default for LoaderOptions {
    fn default() -> Self {
        Self {
            stopwords: HashSet::new(),
            remove_top_n: 100,
            keep_empty: false,
        }
    }
}

impl LoaderOptions {
    pub fn unfiltered() -> Self {
        Self {
            remove_top_n: 0,
            ..Self::default()
        }
    }
}

pub fn read_stopwords(path: &Path) -> Result<HashSet<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut words = HashSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let w = line.trim();
        if !w.is_empty() {
            words.insert(w.to_owned());
        }
    }
    Ok(words)
}

/// Parses a JSON-lines corpus file, checking every record's language.
pub fn read_raw_documents(path: &Path, language: &str) -> Result<Vec<RawDocument>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
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
        let doc: RawDocument = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if doc.lang != language {
            return Err(malformed(format!(
                "record language `{}` differs from `{language}`",
                doc.lang
            )));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_raw_documents(path: &Path, docs: &[RawDocument]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for d in docs {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_corpus(path: &Path, language: &str, options: &LoaderOptions) -> Result<Corpus> {
    let raw = read_raw_documents(path, language)?;
    Corpus::from_raw(language, raw, options)
}

/// Loads a held-out corpus against a training vocabulary.
pub fn load_heldout(path: &Path, vocabulary: &Vocabulary, keep_empty: bool) -> Result<Corpus> {
    let raw = read_raw_documents(path, vocabulary.language())?;
    Corpus::encode_with(raw, vocabulary, keep_empty)
}

fn check_unique_ids(raw: &[RawDocument]) -> Result<()> {
    let mut seen = HashSet::with_capacity(raw.len());
    for d in raw {
        if !seen.insert(d.id.as_str()) {
            return Err(Error::DuplicateDocId(d.id.clone()));
        }
    }
    Ok(())
}

/// Two corpora in different languages plus the hard links between them.
#[derive(Debug, Clone, PartialEq)]
pub struct BilingualCorpus {
    pub side1: Corpus,
    pub side2: Corpus,
    /// `(index in side1, index in side2)`, ascending by side1 index.
    pub hard_links: Vec<(usize, usize)>,
}

impl BilingualCorpus {
    pub fn side(&self, side: usize) -> &Corpus {
        match side {
            0 => &self.side1,
            _ => &self.side2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairReport {
    /// Link ids present on one side only, as `(language, link_id)`.
    pub unmatched: Vec<(String, String)>,
}

pub fn pair_corpora(c1: Corpus, c2: Corpus) -> Result<(BilingualCorpus, PairReport)> {
    if c1.language == c2.language {
        return Err(Error::SameLanguage(c1.language));
    }
    let index1 = link_index(&c1)?;
    let index2 = link_index(&c2)?;
    let mut hard_links = Vec::new();
    let mut report = PairReport::default();
    for (i, d) in c1.documents.iter().enumerate() {
        if let Some(link) = &d.link_id {
            match index2.get(link.as_str()) {
                Some(&j) => hard_links.push((i, j)),
                None => report.unmatched.push((c1.language.clone(), link.clone())),
            }
        }
    }
    for d in &c2.documents {
        if let Some(link) = &d.link_id {
            if !index1.contains_key(link.as_str()) {
                report.unmatched.push((c2.language.clone(), link.clone()));
            }
        }
    }
    for (lang, link) in &report.unmatched {
        log::warn!("link id `{link}` in {lang} corpus has no partner");
    }
    Ok((
        BilingualCorpus {
            side1: c1,
            side2: c2,
            hard_links,
        },
        report,
    ))
}

fn link_index(c: &Corpus) -> Result<HashMap<&str, usize>> {
    let mut index = HashMap::new();
    for (i, d) in c.documents.iter().enumerate() {
        if let Some(link) = &d.link_id {
            if index.insert(link.as_str(), i).is_some() {
                return Err(Error::DuplicateLinkId {
                    language: c.language.clone(),
                    link: link.clone(),
                });
            }
        }
    }
    Ok(index)
}
