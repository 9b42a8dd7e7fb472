//! Training chain: seeded initialization and full Gibbs sweeps.

use rand::Rng as _;

use crate::corpus::BilingualCorpus;
use crate::dictionary::BilingualDictionary;
use crate::error::{Error, Result};
use crate::models::conditionals::{add_softlink_prior, fill_doc_term, fill_flat_word_term, DocExtra};
use crate::models::model::{Provenance, SideModel, TopicModel, FORMAT_VERSION};
use crate::models::state::{CountState, Hyperparams, SideCounts};
use crate::models::tree::{DirichletTree, ROOT_LEAF};
use crate::models::{HardLinkFormulation, ModelKind};
use crate::rng::{sample_index, train_stream, Rng};
use crate::schedule::{compute_lis, run_schedule, AnnealEvent, LisHistory, TrainingHooks};
use crate::transfer::{anneal_matrix, AnnealConfig, AnnealSchedule, TransferMatrix};

/// Everything a training run needs.
#[derive(Debug, Clone)]
pub struct TrainInput<'a> {
    pub kind: ModelKind,
    pub hyperparams: Hyperparams,
    pub corpus: &'a BilingualCorpus,
    /// Required by the tree-based kinds and by adaptive annealing.
    pub dictionary: Option<&'a BilingualDictionary>,
    /// `transfer[s]` has one row per document of side `s`, over the other
    /// side's documents. Required by the soft-link kinds.
    pub transfer: Option<[TransferMatrix; 2]>,
    pub anneal: AnnealConfig,
    pub hardlink: HardLinkFormulation,
}

impl<'a> TrainInput<'a> {
    pub fn new(kind: ModelKind, hyperparams: Hyperparams, corpus: &'a BilingualCorpus) -> Self {
        Self {
            kind,
            hyperparams,
            corpus,
            dictionary: None,
            transfer: None,
            anneal: AnnealConfig::default(),
            hardlink: HardLinkFormulation::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: TopicModel,
    pub state: CountState,
    pub tree: Option<DirichletTree>,
    /// Transfer matrices as they stand after the last annealing step.
    pub transfer: Option<[TransferMatrix; 2]>,
    pub events: Vec<AnnealEvent>,
    pub lis: LisHistory,
}

/// One collapsed Gibbs chain.
#[derive(Debug, Clone)]
pub struct Sampler {
    kind: ModelKind,
    hp: Hyperparams,
    formulation: HardLinkFormulation,
    state: CountState,
    tree: Option<DirichletTree>,
    transfer: Option<[TransferMatrix; 2]>,
    dictionary: Option<BilingualDictionary>,
    lis_folds: usize,
    /// Linked partner of each document, for HardLink.
    partner: [Vec<Option<u32>>; 2],
    /// Pooled `L x K` counts per linked pair, for the joint formulation.
    pooled: Vec<u32>,
    /// Row of each linked document in `pooled`.
    group: [Vec<Option<u32>>; 2],
    /// Transfer pseudo-counts, `D x K` per side, refreshed each sweep.
    priors: [Vec<f64>; 2],
    rngs: [Vec<Rng>; 2],
    sweeps: usize,
    doc_buf: Vec<f64>,
    word_buf: Vec<f64>,
}

impl Sampler {
    pub fn new(input: &TrainInput) -> Result<Self> {
        let hp = input.hyperparams;
        hp.validate()?;
        input.anneal.validate()?;
        let kk = hp.num_topics;
        let corpus = input.corpus;
        let sides = [&corpus.side1, &corpus.side2];

        let transfer = if input.kind.uses_transfer() {
            let t = input
                .transfer
                .clone()
                .ok_or_else(|| Error::Config(format!("{} needs transfer matrices", input.kind.name())))?;
            for s in 0..2 {
                let m = &t[s];
                if m.target_side != s || m.num_targets() != sides[s].num_docs() || m.num_sources != sides[1 - s].num_docs()
                {
                    return Err(Error::Config(format!(
                        "transfer matrix {s} is {}x{} targeting side {}, expected {}x{} targeting side {s}",
                        m.num_targets(),
                        m.num_sources,
                        m.target_side,
                        sides[s].num_docs(),
                        sides[1 - s].num_docs()
                    )));
                }
                m.validate()?;
            }
            Some(t)
        } else {
            None
        };

        if input.kind.uses_tree() && input.dictionary.is_none() {
            return Err(Error::Config(format!("{} needs a dictionary", input.kind.name())));
        }
        if let Some(d) = input.dictionary {
            for (s, c) in sides.iter().enumerate() {
                if d.vocab_len(s) != c.vocabulary.len() {
                    return Err(Error::VocabularyMismatch(format!(
                        "dictionary indexes {} words for side {s}, corpus vocabulary has {}",
                        d.vocab_len(s),
                        c.vocabulary.len()
                    )));
                }
            }
        }
        if input.anneal.schedule == AnnealSchedule::Adaptive {
            let have = input.dictionary.map_or(0, BilingualDictionary::len);
            let needed = 2 * input.anneal.lis_folds;
            if have < needed {
                return Err(Error::Config(format!(
                    "adaptive annealing needs a dictionary with at least {needed} concepts, have {have}"
                )));
            }
        }
        if input.anneal.schedule != AnnealSchedule::None && transfer.is_none() {
            log::warn!("annealing has no effect on {} (no transfer matrices)", input.kind.name());
        }

        let mut partner = [vec![None; sides[0].num_docs()], vec![None; sides[1].num_docs()]];
        if input.kind == ModelKind::HardLink {
            if corpus.hard_links.is_empty() {
                log::warn!("hardlink model without document links behaves as per-language lda");
            }
            for &(a, b) in &corpus.hard_links {
                partner[0][a] = Some(b as u32);
                partner[1][b] = Some(a as u32);
            }
        }

        let tree_template = if input.kind.uses_tree() {
            input.dictionary.map(|d| DirichletTree::new(d, kk))
        } else {
            None
        };

        let mut rngs: [Vec<Rng>; 2] = [Vec::new(), Vec::new()];
        let mut side_counts = Vec::with_capacity(2);
        let mut paths: [Vec<Vec<u32>>; 2] = [Vec::new(), Vec::new()];
        for s in 0..2 {
            let c = sides[s];
            let mut tokens = Vec::with_capacity(c.num_docs());
            let mut z = Vec::with_capacity(c.num_docs());
            for (d, doc) in c.documents.iter().enumerate() {
                let mut rng = train_stream(hp.seed, s, d);
                let mut zd = Vec::with_capacity(doc.tokens.len());
                let mut pd = Vec::new();
                for &w in &doc.tokens {
                    zd.push(rng.random_range(0..kk as u32));
                    if let Some(t) = &tree_template {
                        let leaves = t.leaves(s, w);
                        pd.push(if leaves.is_empty() {
                            ROOT_LEAF
                        } else {
                            leaves[rng.random_range(0..leaves.len())]
                        });
                    }
                }
                tokens.push(doc.tokens.clone());
                z.push(zd);
                paths[s].push(pd);
                rngs[s].push(rng);
            }
            side_counts.push(SideCounts::from_assignments(tokens, z, c.vocabulary.len(), kk)?);
        }
        let side2 = side_counts.pop().expect("two sides");
        let side1 = side_counts.pop().expect("two sides");
        let state = CountState::new(side1, side2)?;
        let tree = match input.dictionary {
            Some(d) if input.kind.uses_tree() => Some(DirichletTree::with_paths(d, &state, paths)?),
            _ => None,
        };

        let mut pooled = Vec::new();
        let mut group = [vec![None; sides[0].num_docs()], vec![None; sides[1].num_docs()]];
        if input.kind == ModelKind::HardLink && input.hardlink == HardLinkFormulation::Joint {
            pooled = vec![0; corpus.hard_links.len() * kk];
            for (g, &(a, b)) in corpus.hard_links.iter().enumerate() {
                group[0][a] = Some(g as u32);
                group[1][b] = Some(g as u32);
                for k in 0..kk {
                    pooled[g * kk + k] = state.sides[0].doc_row(a)[k] + state.sides[1].doc_row(b)[k];
                }
            }
        }

        let priors = [
            vec![0.0; state.sides[0].num_docs() * kk],
            vec![0.0; state.sides[1].num_docs() * kk],
        ];
        Ok(Self {
            kind: input.kind,
            hp,
            formulation: input.hardlink,
            state,
            tree,
            transfer,
            dictionary: input.dictionary.cloned(),
            lis_folds: input.anneal.lis_folds,
            partner,
            pooled,
            group,
            priors,
            rngs,
            sweeps: 0,
            doc_buf: vec![0.0; kk],
            word_buf: Vec::with_capacity(kk),
        })
    }

    pub fn state(&self) -> &CountState {
        &self.state
    }

    pub fn tree(&self) -> Option<&DirichletTree> {
        self.tree.as_ref()
    }

    pub fn transfer(&self) -> Option<&[TransferMatrix; 2]> {
        self.transfer.as_ref()
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps
    }

    fn group_of(&self, side: usize, doc: usize) -> Option<usize> {
        self.group[side][doc].map(|g| g as usize)
    }

    fn refresh_priors(&mut self) -> Result<()> {
        let Some(t) = &self.transfer else {
            return Ok(());
        };
        let kk = self.hp.num_topics;
        for s in 0..2 {
            let source = &self.state.sides[1 - s];
            let priors = &mut self.priors[s];
            priors.fill(0.0);
            for (d, row) in t[s].rows().iter().enumerate() {
                add_softlink_prior(row, source, &mut priors[d * kk..(d + 1) * kk])?;
            }
        }
        Ok(())
    }

    /// One full sweep: every token of side 1, then every token of side 2.
    pub fn sweep(&mut self) -> Result<()> {
        self.refresh_priors()?;
        for side in 0..2 {
            for doc in 0..self.state.sides[side].num_docs() {
                self.sample_document(side, doc)?;
            }
        }
        self.sweeps += 1;
        if cfg!(debug_assertions) {
            self.check_consistency()?;
        }
        Ok(())
    }

    fn sample_document(&mut self, side: usize, doc: usize) -> Result<()> {
        let kk = self.hp.num_topics;
        let joint_group = match (self.kind, self.formulation) {
            (ModelKind::HardLink, HardLinkFormulation::Joint) => self.group_of(side, doc),
            _ => None,
        };
        let len = self.state.sides[side].tokens[doc].len();
        for pos in 0..len {
            let w = self.state.sides[side].tokens[doc][pos];
            let old = self.state.sides[side].z[doc][pos] as usize;
            self.state.sides[side].decrement(doc, w, old)?;
            if let Some(g) = joint_group {
                self.pooled[g * kk + old] -= 1;
            }
            if let Some(t) = &mut self.tree {
                let p = t.path(side, doc, pos);
                t.remove_path(side, p, old)?;
            }

            let own = self.state.sides[side].doc_row(doc);
            let extra = if let Some(g) = joint_group {
                DocExtra::Pooled(&self.pooled[g * kk..(g + 1) * kk])
            } else if let Some(p) = self.partner[side][doc] {
                DocExtra::Partner(self.state.sides[1 - side].doc_row(p as usize))
            } else if self.transfer.is_some() {
                DocExtra::Prior(&self.priors[side][doc * kk..(doc + 1) * kk])
            } else {
                DocExtra::None
            };
            fill_doc_term(own, extra, self.hp.alpha, &mut self.doc_buf);
            match &self.tree {
                Some(t) => {
                    t.fill_word_weights(side, w, &self.state.sides[side], &self.hp, &mut self.word_buf);
                }
                None => fill_flat_word_term(&self.state.sides[side], w, self.hp.beta, &mut self.word_buf),
            }
            let mut total = 0.0;
            for (i, x) in self.word_buf.iter_mut().enumerate() {
                *x *= self.doc_buf[i % kk];
                total += *x;
            }
            if !(total > 0.0 && total.is_finite()) {
                return Err(Error::Internal(format!(
                    "non-finite conditional mass {total} at side {side} document {doc} token {pos}"
                )));
            }
            let j = sample_index(&mut self.rngs[side][doc], &self.word_buf, total);
            let (leaf, k) = (j / kk, j % kk);

            self.state.sides[side].z[doc][pos] = k as u32;
            self.state.sides[side].increment(doc, w, k);
            if let Some(g) = joint_group {
                self.pooled[g * kk + k] += 1;
            }
            if let Some(t) = &mut self.tree {
                let leaves = t.leaves(side, w);
                let path = if leaves.is_empty() { ROOT_LEAF } else { leaves[leaf] };
                t.set_path(side, doc, pos, path);
                t.add_path(side, path, k);
            }
        }
        Ok(())
    }

    pub fn check_consistency(&self) -> Result<()> {
        self.state.check_consistency()?;
        if let Some(t) = &self.tree {
            t.check_consistency(&self.state)?;
        }
        if !self.pooled.is_empty() {
            let kk = self.hp.num_topics;
            for (side1_doc, p) in self.partner[0].iter().enumerate() {
                let Some(p) = p else { continue };
                let g = self.group_of(0, side1_doc).expect("linked");
                for k in 0..kk {
                    let expected = self.state.sides[0].doc_row(side1_doc)[k] + self.state.sides[1].doc_row(*p as usize)[k];
                    if self.pooled[g * kk + k] != expected {
                        return Err(Error::Internal("pooled link counts disagree with documents".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Posterior-mean estimates from the current counts.
    pub fn model(&mut self, corpus: &BilingualCorpus, anneal: &AnnealConfig, include_counts: bool) -> Result<TopicModel> {
        self.refresh_priors()?;
        let kk = self.hp.num_topics;
        let sides = [&corpus.side1, &corpus.side2];
        let mut out = Vec::with_capacity(2);
        for s in 0..2 {
            let counts = &self.state.sides[s];
            let v = counts.vocab_size as f64;
            let phi = (0..kk)
                .map(|k| {
                    let denom = counts.n_topic_total[k] as f64 + v * self.hp.beta;
                    (0..counts.vocab_size)
                        .map(|w| (counts.n_word_topic[w * kk + k] as f64 + self.hp.beta) / denom)
                        .collect()
                })
                .collect();
            let theta = (0..counts.num_docs())
                .map(|d| {
                    let mut pseudo = vec![0.0; kk];
                    if let Some(p) = self.partner[s][d] {
                        for (x, &n) in pseudo.iter_mut().zip(self.state.sides[1 - s].doc_row(p as usize)) {
                            *x = n as f64;
                        }
                    } else if self.transfer.is_some() {
                        pseudo.copy_from_slice(&self.priors[s][d * kk..(d + 1) * kk]);
                    }
                    theta_estimate(counts.doc_row(d), &pseudo, self.hp.alpha)
                })
                .collect();
            out.push(SideModel {
                language: sides[s].language.clone(),
                vocabulary: sides[s].vocabulary.words().to_vec(),
                doc_ids: sides[s].documents.iter().map(|d| d.doc_id.clone()).collect(),
                phi,
                theta,
            });
        }
        let side2 = out.pop().expect("two sides");
        let side1 = out.pop().expect("two sides");
        Ok(TopicModel {
            format_version: FORMAT_VERSION,
            model_kind: self.kind,
            hyperparams: self.hp,
            sides: [side1, side2],
            provenance: Provenance {
                seed: self.hp.seed,
                iterations: self.sweeps,
                anneal: *anneal,
                hardlink_formulation: (self.kind == ModelKind::HardLink).then_some(self.formulation),
            },
            counts: include_counts.then(|| self.state.clone()),
        })
    }
}

/// `θ(k) = (n_k + pseudo_k + α) / (len + Σ pseudo + Kα)`.
pub(crate) fn theta_estimate(own: &[u32], pseudo: &[f64], alpha: f64) -> Vec<f64> {
    let kk = own.len() as f64;
    let len: u32 = own.iter().sum();
    let extra: f64 = pseudo.iter().sum();
    let denom = len as f64 + extra + kk * alpha;
    own.iter().zip(pseudo).map(|(&n, &p)| (n as f64 + p + alpha) / denom).collect()
}

impl TrainingHooks for Sampler {
    fn sweep(&mut self, _iteration: usize) -> Result<()> {
        Sampler::sweep(self)
    }

    fn language_identification_score(&mut self) -> Result<f64> {
        let dict = self
            .dictionary
            .as_ref()
            .ok_or_else(|| Error::Config("the language identification score needs a dictionary".into()))?;
        compute_lis(&self.state, dict, self.lis_folds, self.hp.seed, self.hp.beta)
    }

    fn anneal(&mut self, temperature: f64) -> Result<(usize, f64)> {
        let Some(t) = &mut self.transfer else {
            return Ok((0, 0.0));
        };
        let mut rows = 0;
        let mut max_sum = 0.0;
        for m in t.iter_mut() {
            *m = anneal_matrix(m, temperature);
            let (n, mean) = m.stats();
            rows += n;
            max_sum += mean * n as f64;
        }
        Ok((rows, if rows == 0 { 0.0 } else { max_sum / rows as f64 }))
    }
}

/// Runs a full training chain under the configured annealing schedule.
pub fn train(input: &TrainInput) -> Result<TrainOutput> {
    let mut sampler = Sampler::new(input)?;
    let (events, lis) = run_schedule(&input.anneal, input.hyperparams.train_iterations, &mut sampler)?;
    let model = sampler.model(input.corpus, &input.anneal, true)?;
    Ok(TrainOutput {
        model,
        state: sampler.state.clone(),
        tree: sampler.tree.clone(),
        transfer: sampler.transfer.clone(),
        events,
        lis,
    })
}
