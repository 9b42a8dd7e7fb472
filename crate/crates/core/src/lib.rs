//! Multilingual topic models linked through documents, transfer
//! distributions and bilingual vocabularies, trained by collapsed Gibbs
//! sampling, with coherence, classification and language-identification
//! evaluation.

pub mod corpus;
pub mod dictionary;
pub mod error;
pub mod eval;
pub mod logistic;
pub mod models;
pub mod rng;
pub mod schedule;
pub mod transfer;

pub use error::{Error, ErrorClass, Result};
