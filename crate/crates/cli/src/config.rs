//! Run configuration: one TOML file, with command-line flags layered on top.

use std::path::{Path, PathBuf};

use mltm_core::eval::ClassifyConfig;
use mltm_core::models::{HardLinkFormulation, Hyperparams, ModelKind};
use mltm_core::transfer::{AnnealConfig, FocusConfig, OverlapCount};
use mltm_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus1: Option<PathBuf>,
    pub corpus2: Option<PathBuf>,
    pub language1: String,
    pub language2: String,
    pub dictionary: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus1: None,
            corpus2: None,
            language1: String::new(),
            language2: String::new(),
            dictionary: None,
            stopwords: None,
            reference: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoaderConfig {
    pub remove_top_n: usize,
    pub keep_empty: bool,
}

impl Default for LoaderConfig {
    fn default() -> Self {
        Self {
            remove_top_n: 100,
            keep_empty: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub top_words: usize,
    pub lis_folds: usize,
    pub classify: ClassifyConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            top_words: 20,
            lis_folds: 5,
            classify: ClassifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model_kind: ModelKind,
    /// Wins over `hyperparams.seed`.
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub paths: Paths,
    pub loader: LoaderConfig,
    pub focus: Option<FocusConfig>,
    pub anneal: AnnealConfig,
    pub dictionary_fraction: f64,
    pub overlap: OverlapCount,
    pub hardlink: HardLinkFormulation,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model_kind: ModelKind::Lda,
            seed: 1,
            hyperparams: Hyperparams::default(),
            paths: Paths::default(),
            loader: LoaderConfig::default(),
            focus: None,
            anneal: AnnealConfig::default(),
            dictionary_fraction: 1.0,
            overlap: OverlapCount::default(),
            hardlink: HardLinkFormulation::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [&mut p.corpus1, &mut p.corpus2, &mut p.dictionary, &mut p.stopwords, &mut p.reference] {
            if let Some(x) = slot {
                *x = base.join(&*x);
            }
        }
        p.output_dir = base.join(&p.output_dir);
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks ranges and that every path a training run reads exists.
    pub fn validate_for_training(&self) -> Result<()> {
        self.hyperparams.validate()?;
        self.anneal.validate()?;
        if let Some(f) = &self.focus {
            f.validate()?;
        }
        if !(self.dictionary_fraction > 0.0 && self.dictionary_fraction <= 1.0) {
            return Err(Error::Config(format!("dictionary_fraction {} not in (0, 1]", self.dictionary_fraction)));
        }
        let p = &self.paths;
        if p.language1.is_empty() || p.language2.is_empty() {
            return Err(Error::Config("paths.language1 and paths.language2 are required".into()));
        }
        if p.language1 == p.language2 {
            return Err(Error::Config(format!("both languages are `{}`", p.language1)));
        }
        require(&p.corpus1, "paths.corpus1")?;
        require(&p.corpus2, "paths.corpus2")?;
        if self.model_kind.uses_tree() || self.model_kind.uses_transfer() {
            require(&p.dictionary, "paths.dictionary")?;
        }
        for opt in [&p.dictionary, &p.stopwords] {
            if opt.is_some() {
                require(opt, "path")?;
            }
        }
        Ok(())
    }
}

pub fn require(path: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    match path {
        None => Err(Error::Config(format!("{name} is not set"))),
        Some(p) if !p.exists() => Err(Error::Config(format!("{name}: {} does not exist", p.display()))),
        Some(p) => Ok(p.clone()),
    }
}
