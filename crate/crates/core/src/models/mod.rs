//! Collapsed Gibbs samplers for the document-, soft- and vocabulary-link
//! model family.

pub mod conditionals;
pub mod infer;
pub mod model;
pub mod state;
pub mod train;
pub mod tree;

use serde::{Deserialize, Serialize};

pub use conditionals::{
    hardlink_conditional, hardlink_joint_conditional, lda_conditional, softlink_conditional, softlink_prior,
    voclink_conditional, voclink_path_conditional,
};
pub use infer::infer_heldout;
pub use model::{SideModel, TopicModel};
pub use state::{CountState, Hyperparams, SideCounts};
pub use train::{train, Sampler, TrainInput, TrainOutput};
pub use tree::{DirichletTree, ROOT_LEAF};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lda,
    #[serde(rename = "hardlink")]
    HardLink,
    #[serde(rename = "softlink")]
    SoftLink,
    #[serde(rename = "voclink")]
    VocLink,
    #[serde(rename = "softlink_voclink")]
    SoftLinkVocLink,
}

impl ModelKind {
    pub fn uses_transfer(self) -> bool {
        matches!(self, ModelKind::SoftLink | ModelKind::SoftLinkVocLink)
    }

    pub fn uses_tree(self) -> bool {
        matches!(self, ModelKind::VocLink | ModelKind::SoftLinkVocLink)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lda => "lda",
            ModelKind::HardLink => "hardlink",
            ModelKind::SoftLink => "softlink",
            ModelKind::VocLink => "voclink",
            ModelKind::SoftLinkVocLink => "softlink_voclink",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        Ok(match s {
            "lda" => ModelKind::Lda,
            "hardlink" => ModelKind::HardLink,
            "softlink" => ModelKind::SoftLink,
            "voclink" => ModelKind::VocLink,
            "softlink_voclink" => ModelKind::SoftLinkVocLink,
            other => return Err(crate::error::Error::Config(format!("unknown model kind `{other}`"))),
        })
    }
}

/// How HardLink shares topic counts across a linked pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardLinkFormulation {
    /// Each document conditions on its partner's current counts.
    #[default]
    Conditional,
    /// The pair keeps one pooled count table.
    Joint,
}
