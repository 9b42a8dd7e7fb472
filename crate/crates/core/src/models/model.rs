use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::models::state::{CountState, Hyperparams};
use crate::models::{HardLinkFormulation, ModelKind};
use crate::transfer::AnnealConfig;

pub const FORMAT_VERSION: u32 = 1;

/// Estimates for one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideModel {
    pub language: String,
    pub vocabulary: Vec<String>,
    pub doc_ids: Vec<String>,
    /// `K` rows over the vocabulary.
    pub phi: Vec<Vec<f64>>,
    /// One row of length `K` per training document.
    pub theta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub iterations: usize,
    pub anneal: AnnealConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardlink_formulation: Option<HardLinkFormulation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub format_version: u32,
    pub model_kind: ModelKind,
    pub hyperparams: Hyperparams,
    pub sides: [SideModel; 2],
    pub provenance: Provenance,
    /// Final sampler counts, kept so the model can be evaluated or resumed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<CountState>,
}

impl TopicModel {
    pub fn num_topics(&self) -> usize {
        self.hyperparams.num_topics
    }

    pub fn side(&self, side: usize) -> &SideModel {
        &self.sides[side]
    }

    pub fn vocabulary(&self, side: usize) -> Result<Vocabulary> {
        let s = &self.sides[side];
        Vocabulary::from_words(s.language.clone(), s.vocabulary.clone())
    }

    /// Index of the side whose language is `language`.
    pub fn side_of_language(&self, language: &str) -> Option<usize> {
        self.sides.iter().position(|s| s.language == language)
    }

    /// Checks shapes and that every distribution sums to one.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let kk = self.num_topics();
        for s in &self.sides {
            if s.phi.len() != kk || s.phi.iter().any(|r| r.len() != s.vocabulary.len()) {
                return Err(Error::Internal(format!("{}: phi has the wrong shape", s.language)));
            }
            if s.theta.len() != s.doc_ids.len() || s.theta.iter().any(|r| r.len() != kk) {
                return Err(Error::Internal(format!("{}: theta has the wrong shape", s.language)));
            }
            for row in s.phi.iter().chain(&s.theta) {
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-9 || row.iter().any(|x| !(*x >= 0.0)) {
                    return Err(Error::Internal(format!(
                        "{}: distribution sums to {total}",
                        s.language
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Malformed {
            path: path.to_owned(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }
}
