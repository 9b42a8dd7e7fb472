//! Annealing schedules and the language identification score (LIS).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dictionary::{BilingualDictionary, Concept};
use crate::error::{Error, Result};
use crate::logistic::{cross_validated_accuracy, grouped_folds, LogisticConfig};
use crate::models::state::CountState;
use crate::transfer::{AnnealConfig, AnnealSchedule};

/// `p(k) ∝ n_{w|k} + β` for the concept's word in `side`; uniform when
/// every term is zero.
pub fn concept_topic_distribution(state: &CountState, concept: &Concept, side: usize, beta: f64) -> Vec<f64> {
    let counts = &state.sides[side];
    let row = counts.word_row(concept.word(side));
    let raw: Vec<f64> = row.iter().map(|&n| n as f64 + beta).collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.into_iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / row.len() as f64; row.len()]
    }
}

/// Two labelled rows per concept, one per language, in a canonical order
/// (by word pair, then language) so the result does not depend on how the
/// dictionary happens to order its concepts.
pub fn concept_features(state: &CountState, dict: &BilingualDictionary, beta: f64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut concepts: Vec<&Concept> = dict.concepts().iter().collect();
    concepts.sort_by_key(|c| (c.word1, c.word2));
    let mut x = Vec::with_capacity(2 * concepts.len());
    let mut y = Vec::with_capacity(2 * concepts.len());
    for c in concepts {
        for side in 0..2 {
            x.push(concept_topic_distribution(state, c, side, beta));
            y.push(side == 1);
        }
    }
    (x, y)
}

/// Cross-validated accuracy of a logistic classifier predicting the
/// language of each row. Rows come in concept pairs as laid out by
/// [`concept_features`]; both rows of a concept share a fold.
pub fn lis_from_features(x: &[Vec<f64>], y: &[bool], folds: usize, seed: u64) -> Result<f64> {
    let concepts = y.len() / 2;
    if y.len() % 2 != 0 || y.chunks(2).any(|p| p != [false, true]) {
        return Err(Error::Internal("LIS rows are not (language 1, language 2) pairs".into()));
    }
    if concepts < 2 * folds {
        return Err(Error::TooFewConcepts {
            needed: 2 * folds,
            have: concepts,
        });
    }
    let fold: Vec<usize> = grouped_folds(concepts, folds, seed).into_iter().flat_map(|f| [f, f]).collect();
    Ok(cross_validated_accuracy(x, y, &fold, folds, &LogisticConfig::default()))
}

pub fn compute_lis(state: &CountState, dict: &BilingualDictionary, folds: usize, seed: u64, beta: f64) -> Result<f64> {
    if dict.len() < 2 * folds {
        return Err(Error::TooFewConcepts {
            needed: 2 * folds,
            have: dict.len(),
        });
    }
    let (x, y) = concept_features(state, dict, beta);
    lis_from_features(&x, &y, folds, seed)
}

/// LIS values keyed by the iteration after which they were computed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LisHistory {
    pub window: usize,
    pub values: Vec<(usize, f64)>,
}

impl LisHistory {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, iteration: usize, lis: f64) {
        self.values.push((iteration, lis));
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().map(|v| v.1)
    }

    /// Mean of the values recorded in iterations `(from, to]`.
    fn window_mean(&self, from: usize, to: usize) -> Option<f64> {
        let (sum, n) = self
            .values
            .iter()
            .filter(|(t, _)| *t > from && *t <= to)
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// True when the mean LIS over `(t-I, t]` strictly exceeds the mean over
/// `(t-2I, t-I]`.
pub fn should_anneal(history: &LisHistory, t: usize) -> Result<bool> {
    let i = history.window;
    if i == 0 || t < 2 * i {
        return Err(Error::InsufficientHistory(format!(
            "iteration {t} is before two full windows of {i}"
        )));
    }
    let recent = history.window_mean(t - i, t);
    let previous = history.window_mean(t - 2 * i, t - i);
    match (recent, previous) {
        (Some(r), Some(p)) => Ok(r > p),
        _ => Err(Error::InsufficientHistory(format!(
            "no LIS values recorded in one of the windows ending at {t}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealEvent {
    pub iteration: usize,
    pub mode: AnnealSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lis: Option<f64>,
    pub rows_annealed: usize,
    pub max_weight_mean: f64,
}

/// What the schedule needs from a training loop.
pub trait TrainingHooks {
    fn sweep(&mut self, iteration: usize) -> Result<()>;
    fn language_identification_score(&mut self) -> Result<f64>;
    /// Anneals every transfer matrix; returns the number of nonempty rows
    /// and the mean of their maximum weights afterwards.
    fn anneal(&mut self, temperature: f64) -> Result<(usize, f64)>;
}

/// Runs `iterations` sweeps, annealing as `cfg` prescribes.
pub fn run_schedule(
    cfg: &AnnealConfig,
    iterations: usize,
    hooks: &mut dyn TrainingHooks,
) -> Result<(Vec<AnnealEvent>, LisHistory)> {
    let mut events = Vec::new();
    let mut history = LisHistory::new(cfg.interval);
    for t in 1..=iterations {
        hooks.sweep(t)?;
        let fire = match cfg.schedule {
            AnnealSchedule::None => false,
            AnnealSchedule::Fixed => t % cfg.interval == 0 && t <= cfg.stop_iteration,
            AnnealSchedule::Adaptive => {
                if t % cfg.lis_every == 0 {
                    let lis = hooks.language_identification_score()?;
                    log::debug!("iteration {t}: LIS {lis:.4}");
                    history.push(t, lis);
                }
                t % cfg.interval == 0
                    && t >= 2 * cfg.interval
                    && t <= cfg.stop_iteration
                    && should_anneal(&history, t).unwrap_or(false)
            }
        };
        if fire {
            let (rows, max_mean) = hooks.anneal(cfg.temperature)?;
            log::info!("iteration {t}: annealed {rows} rows, mean max weight {max_mean:.4}");
            events.push(AnnealEvent {
                iteration: t,
                mode: cfg.schedule,
                lis: if cfg.schedule == AnnealSchedule::Adaptive {
                    history.last()
                } else {
                    None
                },
                rows_annealed: rows,
                max_weight_mean: max_mean,
            });
        }
    }
    Ok((events, history))
}

pub fn write_event_log(path: &Path, events: &[AnnealEvent]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_event_log(path: &Path) -> Result<Vec<AnnealEvent>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Malformed {
                path: path.to_owned(),
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}
