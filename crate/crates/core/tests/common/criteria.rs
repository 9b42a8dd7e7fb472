//! The ten acceptance checks. Each returns a one-line summary on success and
//! a reason on failure; the acceptance harness prints them and the
//! integration tests assert on the cheap ones.

use std::collections::BTreeMap;

use mltm_core::corpus::{load_corpus, read_raw_documents, write_raw_documents, Corpus, LoaderOptions, RawDocument};
use mltm_core::dictionary::{load_dictionary, BilingualDictionary};
use mltm_core::eval::{
    classify_direction, cnpmi_model, cnpmi_topic, generate_synthetic, npmi, top_words, ClassifyConfig, EvalReport,
    ReferenceCorpus, SyntheticConfig, SyntheticWorld,
};
use mltm_core::eval::cnpmi::write_reference;
use mltm_core::logistic::loss_and_gradient;
use mltm_core::models::model::Provenance;
use mltm_core::models::{
    hardlink_conditional, hardlink_joint_conditional, infer_heldout, lda_conditional, softlink_conditional, softlink_prior,
    train, voclink_conditional, CountState, DirichletTree, HardLinkFormulation, Hyperparams, ModelKind, Sampler, SideModel,
    TopicModel, TrainInput, ROOT_LEAF,
};
use mltm_core::schedule::{compute_lis, read_event_log, run_schedule, write_event_log, TrainingHooks};
use mltm_core::transfer::{
    anneal_matrix, build_transfer_matrix, build_transfer_pair, static_focus, AnnealConfig, AnnealSchedule, FocusConfig,
    OverlapCount, Scope, TransferMatrix,
};
use rand::Rng;

use super::*;

pub type Outcome = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn flat_reference(own: &SideCounts, partner: &[u32], doc: usize, w: u32, hp: &Hyperparams) -> Vec<f64> {
    let k = own.num_topics;
    let v = own.vocab_size as f64;
    let raw: Vec<f64> = (0..k)
        .map(|t| {
            let d = own.doc_row(doc)[t] as f64 + partner[t] as f64 + hp.alpha;
            d * (own.word_row(w)[t] as f64 + hp.beta) / (own.n_topic_total[t] as f64 + v * hp.beta)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn random_hp(r: &mut ChaCha8Rng, k: usize) -> Hyperparams {
    Hyperparams {
        num_topics: k,
        alpha: r.random_range(0.01..2.0),
        beta: r.random_range(0.001..1.0),
        ..Hyperparams::default()
    }
}

/// Tiny linked bilingual corpus for trajectory comparisons.
pub fn linked_world(seed: u64) -> SyntheticWorld {
    generate_synthetic(&SyntheticConfig {
        num_topics: 3,
        vocab_size: 40,
        num_docs: 30,
        doc_len: 12,
        link_fraction: 0.5,
        heldout_docs: 10,
        reference_pairs: 50,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

fn small_hp(seed: u64) -> Hyperparams {
    Hyperparams {
        num_topics: 3,
        seed,
        train_iterations: 40,
        ..Hyperparams::default()
    }
}

/// Steps two samplers in lockstep and reports the first sweep where any
/// assignment differs.
pub fn same_trajectory(a: &TrainInput, b: &TrainInput, sweeps: usize) -> std::result::Result<(), String> {
    let mut sa = Sampler::new(a).map_err(|e| e.to_string())?;
    let mut sb = Sampler::new(b).map_err(|e| e.to_string())?;
    for t in 0..=sweeps {
        if t > 0 {
            sa.sweep().map_err(|e| e.to_string())?;
            sb.sweep().map_err(|e| e.to_string())?;
        }
        for s in 0..2 {
            if sa.state().sides[s].z != sb.state().sides[s].z {
                return Err(format!("assignments diverge on side {s} after sweep {t}"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn criterion_1() -> Outcome {
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    let states = 1500;
    for _ in 0..states {
        let k = r.random_range(2..=10);
        let v = r.random_range(1..=30);
        let own = random_side(&mut r, k, v, 4, 100);
        let partner_side = random_side(&mut r, k, v, 4, 100);
        let hp = random_hp(&mut r, k);
        let doc = r.random_range(0..4);
        let pos = r.random_range(0..own.tokens[doc].len());
        let partner = partner_side.doc_row(r.random_range(0..4));
        let pooled: Vec<u32> = own.doc_row(doc).iter().zip(partner).map(|(a, b)| a + b).collect();
        let cond = hardlink_conditional(&own, doc, pos, partner, &hp).map_err(|e| e.to_string())?;
        let joint = hardlink_joint_conditional(&own, doc, pos, &pooled, &hp).map_err(|e| e.to_string())?;
        let reference = flat_reference(&own, partner, doc, own.tokens[doc][pos], &hp);
        worst = worst.max(max_abs_diff(&cond, &joint)).max(max_abs_diff(&cond, &reference));
    }
    ensure(worst < 1e-12, || format!("max |joint - conditional| = {worst:e}"))?;

    for seed in 1..=3 {
        let w = linked_world(seed);
        let mut a = TrainInput::new(ModelKind::HardLink, small_hp(seed), &w.corpus);
        a.hardlink = HardLinkFormulation::Conditional;
        let mut b = a.clone();
        b.hardlink = HardLinkFormulation::Joint;
        same_trajectory(&a, &b, 40)?;
    }
    Ok(format!("{states} states, max diff {worst:.1e}; trajectories identical over 3 seeds x 40 sweeps"))
}

pub fn criterion_2() -> Outcome {
    let (checked, worst) = enumeration_sweep(&TOY_MODELS);
    ensure(worst < 1e-10, || format!("max |oracle - sampler| = {worst:e} over {checked} conditionals"))?;
    Ok(format!("{checked} token conditionals across 6 samplers, max diff {worst:.1e}"))
}

pub fn criterion_3() -> Outcome {
    let mut r = rng(303);
    let mut worst = [0.0f64; 4];
    let states = 1000;
    for _ in 0..states {
        let k = r.random_range(2..=10);
        let v = r.random_range(1..=30);
        let docs = 4;
        let own = random_side(&mut r, k, v, docs, 100);
        let other = random_side(&mut r, k, v, docs, 100);
        let hp = random_hp(&mut r, k);
        let doc = r.random_range(0..docs);
        let pos = r.random_range(0..own.tokens[doc].len());
        let lda = lda_conditional(&own, doc, pos, &hp).map_err(|e| e.to_string())?;

        // Indicator row.
        let j = r.random_range(0..docs);
        let prior = softlink_prior(&[(j as u32, 1.0)], &other).map_err(|e| e.to_string())?;
        let soft = softlink_conditional(&own, doc, pos, &prior, &hp).map_err(|e| e.to_string())?;
        let hard = hardlink_conditional(&own, doc, pos, other.doc_row(j), &hp).map_err(|e| e.to_string())?;
        worst[0] = worst[0].max(max_abs_diff(&soft, &hard));

        // Empty row.
        let prior = softlink_prior(&[], &other).map_err(|e| e.to_string())?;
        let soft = softlink_conditional(&own, doc, pos, &prior, &hp).map_err(|e| e.to_string())?;
        worst[1] = worst[1].max(max_abs_diff(&soft, &lda));

        // Empty dictionary.
        let state = CountState::new(own.clone(), other.clone()).map_err(|e| e.to_string())?;
        let paths = [0, 1].map(|s| state.sides[s].tokens.iter().map(|t| vec![ROOT_LEAF; t.len()]).collect());
        let tree = DirichletTree::with_paths(&BilingualDictionary::empty(v, v), &state, paths).map_err(|e| e.to_string())?;
        let voc = voclink_conditional(&state, &tree, 0, doc, pos, &hp).map_err(|e| e.to_string())?;
        worst[2] = worst[2].max(max_abs_diff(&voc, &lda));

        // Focal threshold one empties a random dense row.
        let weights: Vec<f64> = (0..docs).map(|_| r.random_range(0.01..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let row: Vec<(u32, f64)> = weights.iter().enumerate().map(|(i, w)| (i as u32, w / total)).collect();
        let m = TransferMatrix::from_rows(0, docs, vec![row]).map_err(|e| e.to_string())?;
        let focused = static_focus(&m, &FocusConfig { threshold: 1.0, scope: Scope::DocWise });
        let prior = softlink_prior(focused.row(0), &other).map_err(|e| e.to_string())?;
        let soft = softlink_conditional(&own, doc, pos, &prior, &hp).map_err(|e| e.to_string())?;
        worst[3] = worst[3].max(max_abs_diff(&soft, &lda));
    }
    let names = ["indicator=HardLink", "empty=LDA", "empty dict=LDA", "pi=1=LDA"];
    for (n, w) in names.iter().zip(worst) {
        ensure(w < 1e-12, || format!("{n}: max diff {w:e}"))?;
    }

    // The same reductions hold for whole training runs.
    let w = linked_world(7);
    let hp = small_hp(7);
    let lda = TrainInput::new(ModelKind::Lda, hp, &w.corpus);
    let mut soft_empty = TrainInput::new(ModelKind::SoftLink, hp, &w.corpus);
    soft_empty.transfer = Some([0, 1].map(|s| TransferMatrix::empty(s, w.corpus.side(s).num_docs(), w.corpus.side(1 - s).num_docs())));
    same_trajectory(&lda, &soft_empty, 20)?;
    let mut soft_pi1 = TrainInput::new(ModelKind::SoftLink, hp, &w.corpus);
    soft_pi1.transfer = Some(build_transfer_pair(
        &w.corpus,
        &w.dictionary,
        Some(&FocusConfig { threshold: 1.0, scope: Scope::DocWise }),
        OverlapCount::Pairs,
    ));
    same_trajectory(&lda, &soft_pi1, 20)?;
    let empty = BilingualDictionary::empty(w.corpus.side1.vocabulary.len(), w.corpus.side2.vocabulary.len());
    let mut voc = TrainInput::new(ModelKind::VocLink, hp, &w.corpus);
    voc.dictionary = Some(&empty);
    same_trajectory(&lda, &voc, 20)?;
    Ok(format!(
        "{states} states, max diffs {:.1e} / {:.1e} / {:.1e} / {:.1e}; LDA trajectories reproduced",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

pub fn criterion_4() -> Outcome {
    for seed in 0..50u64 {
        let (bc, dict) = random_bilingual(400 + seed, 20, 12, 10, 15);
        for target_side in 0..2 {
            let (t, s) = (bc.side(target_side), bc.side(1 - target_side));
            let m = build_transfer_matrix(t, s, &dict, target_side, OverlapCount::Pairs);
            let got = dense_rows(m.rows(), s.num_docs());
            let want = brute_force_transfer(t, s, &dict, target_side);
            for (g, w) in got.iter().zip(&want) {
                ensure(max_abs_diff(g, w) < 1e-12, || format!("corpus {seed} side {target_side}: {g:?} vs {w:?}"))?;
            }
        }
    }

    let row = |w: Vec<f64>| {
        TransferMatrix::from_rows(0, w.len(), vec![w.iter().enumerate().map(|(i, &x)| (i as u32, x)).filter(|e| e.1 > 0.0).collect()])
            .unwrap()
    };
    let focused = static_focus(&row(vec![0.5, 0.3, 0.2]), &FocusConfig { threshold: 0.5, scope: Scope::DocWise });
    let got = dense_rows(focused.rows(), 3);
    ensure(max_abs_diff(&got[0], &[0.625, 0.375, 0.0]) < 1e-12, || format!("focus example {got:?}"))?;
    let annealed = dense_rows(anneal_matrix(&row(vec![0.8, 0.2]), 0.9).rows(), 2);
    let (a, b) = (0.8f64.powf(1.0 / 0.9), 0.2f64.powf(1.0 / 0.9));
    ensure(max_abs_diff(&annealed[0], &[a / (a + b), b / (a + b)]) < 1e-12, || format!("anneal example {annealed:?}"))?;
    ensure((annealed[0][0] - 0.8235).abs() < 5e-5, || format!("anneal example {annealed:?}"))?;
    let uniform = dense_rows(anneal_matrix(&row(vec![0.25; 4]), 0.9).rows(), 4);
    ensure(max_abs_diff(&uniform[0], &[0.25; 4]) < 1e-12, || "uniform row changed".into())?;

    let mut r = rng(404);
    let mut least: f64 = 1.0;
    for _ in 0..200 {
        let w: Vec<f64> = loop {
            let w: Vec<f64> = (0..3).map(|_| r.random_range(0.05..1.0)).collect();
            if w.iter().any(|x| (x - w[0]).abs() > 1e-3) {
                break w;
            }
        };
        let total: f64 = w.iter().sum();
        let mut m = row(w.iter().map(|x| x / total).collect());
        for _ in 0..200 {
            m = anneal_matrix(&m, 0.9);
        }
        least = least.min(m.row(0).iter().map(|e| e.1).fold(0.0, f64::max));
    }
    ensure(least > 0.999, || format!("max row weight after 200 steps only {least}"))?;
    Ok(format!("50 corpora exact; focus/anneal examples reproduced; min max-weight after 200 steps {least:.6}"))
}

// ---------------------------------------------------------------------------
// Synthetic recovery

pub const SYNTHETIC_SEEDS: [u64; 3] = [1, 2, 3];
pub const SYNTHETIC_ITERATIONS: usize = 500;
pub const TOP_WORDS: usize = 20;

pub struct RunScores {
    pub cnpmi: f64,
    pub f1: f64,
    pub majority: f64,
}

pub fn synthetic_world(seed: u64) -> SyntheticWorld {
    generate_synthetic(&SyntheticConfig {
        num_topics: 5,
        vocab_size: 500,
        num_docs: 200,
        doc_len: 50,
        dict_coverage: 0.3,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

/// Trains one model on `world`, then scores CNPMI on the world's reference
/// and classification from the first language to held-out documents of the
/// second.
pub fn synthetic_run(world: &SyntheticWorld, kind: ModelKind, dict_fraction: f64) -> mltm_core::Result<RunScores> {
    let seed = world.config.seed;
    let hp = Hyperparams {
        num_topics: world.config.num_topics,
        train_iterations: SYNTHETIC_ITERATIONS,
        seed,
        ..Hyperparams::default()
    };
    let dict = world.dictionary_fraction(dict_fraction, seed)?;
    let mut input = TrainInput::new(kind, hp, &world.corpus);
    input.dictionary = Some(&dict);
    if kind.uses_transfer() {
        let focus = FocusConfig { threshold: 0.6, scope: Scope::DocWise };
        input.transfer = Some(build_transfer_pair(&world.corpus, &dict, Some(&focus), OverlapCount::Pairs));
    }
    let out = train(&input)?;
    let (_, cnpmi) = cnpmi_model(&out.model, &world.reference()?, TOP_WORDS)?;
    let test = world.heldout(1)?;
    let test_theta = infer_heldout(&out.model, &test, 500, seed)?;
    let f = classify_direction(&world.corpus.side1, &out.model.sides[0].theta, &test, &test_theta, &ClassifyConfig::default());
    Ok(RunScores {
        cnpmi,
        f1: f.f1_micro,
        majority: f.majority_f1,
    })
}

pub fn criterion_5() -> Outcome {
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for seed in SYNTHETIC_SEEDS {
        let w = synthetic_world(seed);
        let lda = synthetic_run(&w, ModelKind::Lda, 1.0).map_err(|e| e.to_string())?;
        let soft = synthetic_run(&w, ModelKind::SoftLink, 1.0).map_err(|e| e.to_string())?;
        lines.push(format!(
            "seed {seed}: CNPMI soft {:.3} lda {:.3}, F1 {:.3} majority {:.3}",
            soft.cnpmi, lda.cnpmi, soft.f1, soft.majority
        ));
        if soft.cnpmi < lda.cnpmi + 0.05 {
            failures.push(format!("seed {seed}: CNPMI margin {:.3} < 0.05", soft.cnpmi - lda.cnpmi));
        }
        if soft.f1 < soft.majority + 0.15 {
            failures.push(format!("seed {seed}: F1 margin {:.3} < 0.15", soft.f1 - soft.majority));
        }
    }
    if failures.is_empty() {
        Ok(lines.join("; "))
    } else {
        Err(format!("{} [{}]", failures.join("; "), lines.join("; ")))
    }
}

pub fn criterion_6() -> Outcome {
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for seed in SYNTHETIC_SEEDS {
        let w = synthetic_world(seed);
        for (name, kind, frac) in [
            ("soft@0.2", ModelKind::SoftLink, 0.2),
            ("soft@1.0", ModelKind::SoftLink, 1.0),
            ("voc@0.2", ModelKind::VocLink, 0.2),
            ("voc@1.0", ModelKind::VocLink, 1.0),
        ] {
            let s = synthetic_run(&w, kind, frac).map_err(|e| e.to_string())?;
            *sums.entry(name).or_default() += s.cnpmi / SYNTHETIC_SEEDS.len() as f64;
        }
    }
    let summary = sums.iter().map(|(k, v)| format!("{k} {v:.3}")).collect::<Vec<_>>().join(", ");
    let soft_gap = (sums["soft@1.0"] - sums["soft@0.2"]).abs();
    let voc_drop = sums["voc@1.0"] - sums["voc@0.2"];
    ensure(soft_gap < 0.05, || format!("SoftLink gap {soft_gap:.3} >= 0.05 ({summary})"))?;
    ensure(voc_drop >= 0.02, || format!("VocLink drop {voc_drop:.3} < 0.02 ({summary})"))?;
    Ok(format!("3-seed means: {summary}"))
}

// ---------------------------------------------------------------------------
// Evaluation fixtures

/// Wraps per-side φ tables in a model with uniform θ.
pub fn model_from_phi(phi: [Vec<Vec<f64>>; 2]) -> TopicModel {
    let k = phi[0].len();
    let side = |lang: &str, p: Vec<Vec<f64>>| SideModel {
        language: lang.into(),
        vocabulary: (0..p[0].len()).map(|i| format!("{lang}{i}")).collect(),
        doc_ids: vec![format!("{lang}-doc")],
        phi: p,
        theta: vec![vec![1.0 / k as f64; k]],
    };
    let [p1, p2] = phi;
    TopicModel {
        format_version: mltm_core::models::model::FORMAT_VERSION,
        model_kind: ModelKind::Lda,
        hyperparams: Hyperparams {
            num_topics: k,
            ..Hyperparams::default()
        },
        sides: [side("aa", p1), side("bb", p2)],
        provenance: Provenance {
            seed: 1,
            iterations: 0,
            anneal: AnnealConfig::default(),
            hardlink_formulation: None,
        },
        counts: None,
    }
}

fn random_phi(r: &mut ChaCha8Rng, k: usize, v: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| {
            let row: Vec<f64> = (0..v).map(|_| r.random::<f64>()).collect();
            let t: f64 = row.iter().sum();
            row.into_iter().map(|x| x / t).collect()
        })
        .collect()
}

pub fn criterion_7() -> Outcome {
    // Topic t's top words on both sides are words 3t..3t+3, and every
    // reference pair holds exactly one topic's words on both sides.
    let (k, c) = (4, 3);
    let v = k * c;
    let phi = || -> Vec<Vec<f64>> {
        (0..k)
            .map(|t| (0..v).map(|w| if w / c == t { 0.3 } else { 0.1 / (v - c) as f64 }).collect())
            .collect()
    };
    let model = model_from_phi([phi(), phi()]);
    let pairs: Vec<(Vec<u32>, Vec<u32>)> = (0..40)
        .map(|r| {
            let words: Vec<u32> = ((r % k) * c..(r % k + 1) * c).map(|w| w as u32).collect();
            (words.clone(), words)
        })
        .collect();
    let reference = ReferenceCorpus::from_pairs(&pairs, [v, v]).map_err(|e| e.to_string())?;
    let (per_topic, mean) = cnpmi_model(&model, &reference, c).map_err(|e| e.to_string())?;
    ensure(mean == 1.0 && per_topic.iter().all(|&x| x == 1.0), || format!("degenerate model scored {per_topic:?}"))?;

    // Independent words everywhere.
    let mut r = rng(707);
    let v = 200;
    let pairs: Vec<(Vec<u32>, Vec<u32>)> = (0..10_000)
        .map(|_| {
            let mut draw = || (0..20).map(|_| r.random_range(0..v as u32)).collect::<Vec<_>>();
            (draw(), draw())
        })
        .collect();
    let reference = ReferenceCorpus::from_pairs(&pairs, [v, v]).map_err(|e| e.to_string())?;
    let model = model_from_phi([random_phi(&mut r, 10, v), random_phi(&mut r, 10, v)]);
    let (_, mean) = cnpmi_model(&model, &reference, 10).map_err(|e| e.to_string())?;
    ensure(mean.abs() < 0.05, || format!("random model mean {mean}"))?;

    let mut out_of_range = 0;
    for t in 0..10 {
        let w1 = top_words(&model.sides[0].phi[t], 10);
        let w2 = top_words(&model.sides[1].phi[t], 10);
        for &a in &w1 {
            for &b in &w2 {
                let x = npmi(reference.joint_freq(a, b), reference.doc_freq(0, a), reference.doc_freq(1, b), reference.len());
                if !(-1.0..=1.0).contains(&x) {
                    out_of_range += 1;
                }
            }
        }
        let topic = cnpmi_topic(&w1, &w2, &reference).map_err(|e| e.to_string())?;
        ensure((-1.0..=1.0).contains(&topic), || format!("topic score {topic}"))?;
    }
    ensure(out_of_range == 0, || format!("{out_of_range} NPMI terms outside [-1, 1]"))?;
    Ok(format!("degenerate mean 1.0 exactly; random baseline {mean:+.4} on 10,000 pairs; all terms in range"))
}

/// Count state over `n` concepts `(i, i)` in which the first language's
/// word `i` has topic counts `f(0, i)` and the second's `f(1, i)`.
fn concept_state(n: usize, k: usize, f: impl Fn(usize, usize) -> Vec<u32>) -> (CountState, BilingualDictionary) {
    let sides: Vec<SideCounts> = (0..2)
        .map(|s| {
            let mut tokens = Vec::new();
            let mut z = Vec::new();
            for w in 0..n {
                for (t, &c) in f(s, w).iter().enumerate() {
                    tokens.extend(std::iter::repeat_n(w as u32, c as usize));
                    z.extend(std::iter::repeat_n(t as u32, c as usize));
                }
            }
            SideCounts::from_assignments(vec![tokens], vec![z], n, k).unwrap()
        })
        .collect();
    let dict = BilingualDictionary::from_pairs((0..n as u32).map(|i| (i, i)), n, n).unwrap();
    (CountState::new(sides[0].clone(), sides[1].clone()).unwrap(), dict)
}

pub fn criterion_8() -> Outcome {
    let k = 6;
    let mut r = rng(808);
    let shared: Vec<Vec<u32>> = (0..200).map(|_| (0..k).map(|_| r.random_range(0..20)).collect()).collect();
    let (state, dict) = concept_state(200, k, |_, w| shared[w].clone());
    let symmetric = compute_lis(&state, &dict, 5, 1, 0.01).map_err(|e| e.to_string())?;
    ensure((symmetric - 0.5).abs() <= 0.1, || format!("symmetric LIS {symmetric}"))?;

    let (state, dict) = concept_state(100, k, |s, w| {
        (0..k).map(|t| if t % 2 == s { 5 + (w % 7) as u32 } else { 0 }).collect()
    });
    let separated = compute_lis(&state, &dict, 5, 1, 0.01).map_err(|e| e.to_string())?;
    ensure(separated >= 0.95, || format!("separated LIS {separated}"))?;

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = r.random_range(1..6);
        let n = r.random_range(2..15);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<bool> = (0..n).map(|_| r.random()).collect();
        let w: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let b = r.random_range(-1.0..1.0);
        let lambda = r.random_range(0.1..2.0);
        let (_, grad, grad_b) = loss_and_gradient(&w, b, &x, &y, lambda);
        let h = 1e-6;
        for j in 0..=d {
            let shifted = |delta: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if j < d {
                    w2[j] += delta;
                } else {
                    b2 += delta;
                }
                loss_and_gradient(&w2, b2, &x, &y, lambda).0
            };
            let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
            let analytic = if j < d { grad[j] } else { grad_b };
            worst = worst.max((numeric - analytic).abs() / analytic.abs().max(1e-3));
        }
    }
    ensure(worst < 1e-5, || format!("gradient relative error {worst:e}"))?;
    Ok(format!("symmetric LIS {symmetric:.3}, separated LIS {separated:.3}, gradient rel err {worst:.1e}"))
}

struct Counting {
    anneals: usize,
}

impl TrainingHooks for Counting {
    fn sweep(&mut self, _: usize) -> mltm_core::Result<()> {
        Ok(())
    }
    fn language_identification_score(&mut self) -> mltm_core::Result<f64> {
        Ok(0.5)
    }
    fn anneal(&mut self, _: f64) -> mltm_core::Result<(usize, f64)> {
        self.anneals += 1;
        Ok((1, 1.0))
    }
}

pub fn criterion_9() -> Outcome {
    let cfg = AnnealConfig {
        schedule: AnnealSchedule::Fixed,
        interval: 10,
        stop_iteration: 400,
        ..AnnealConfig::default()
    };
    let mut hooks = Counting { anneals: 0 };
    let (events, _) = run_schedule(&cfg, 1000, &mut hooks).map_err(|e| e.to_string())?;
    ensure(events.len() == 40 && hooks.anneals == 40, || format!("{} events", events.len()))?;
    ensure(events.last().map(|e| e.iteration) == Some(400), || "last event not at 400".into())?;

    let w = linked_world(9);
    let mut input = TrainInput::new(ModelKind::SoftLink, Hyperparams { train_iterations: 450, ..small_hp(9) }, &w.corpus);
    input.transfer = Some(build_transfer_pair(&w.corpus, &w.dictionary, None, OverlapCount::Pairs));
    input.anneal = cfg;
    let out = train(&input).map_err(|e| e.to_string())?;
    ensure(out.events.len() == 40, || format!("training logged {} events", out.events.len()))?;
    Ok("40 events from the schedule and from a 450-sweep SoftLink run".into())
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

pub fn criterion_10() -> Outcome {
    let w = linked_world(10);
    let dir = tmp();
    let p = |name: &str| dir.path().join(name);

    // Byte-identical models, for every model kind.
    for kind in [ModelKind::Lda, ModelKind::HardLink, ModelKind::SoftLink, ModelKind::VocLink, ModelKind::SoftLinkVocLink] {
        let run = |name: &str| -> std::result::Result<Vec<u8>, String> {
            let mut input = TrainInput::new(kind, small_hp(10), &w.corpus);
            input.dictionary = Some(&w.dictionary);
            if kind.uses_transfer() {
                input.transfer = Some(build_transfer_pair(&w.corpus, &w.dictionary, None, OverlapCount::Pairs));
                input.anneal = AnnealConfig {
                    schedule: AnnealSchedule::Adaptive,
                    interval: 5,
                    lis_folds: 2,
                    ..AnnealConfig::default()
                };
            }
            let out = train(&input).map_err(|e| e.to_string())?;
            out.model.save(&p(name)).map_err(|e| e.to_string())?;
            std::fs::read(p(name)).map_err(|e| e.to_string())
        };
        let a = run("a.json")?;
        let b = run("b.json")?;
        ensure(a == b, || format!("{} model files differ", kind.name()))?;
        let loaded = TopicModel::load(&p("a.json")).map_err(|e| e.to_string())?;
        loaded.save(&p("c.json")).map_err(|e| e.to_string())?;
        ensure(std::fs::read(p("c.json")).unwrap() == a, || format!("{} model does not round-trip", kind.name()))?;
    }

    // Raw documents and serialized corpora.
    write_raw_documents(&p("raw.jsonl"), &w.raw[0]).map_err(|e| e.to_string())?;
    let raw: Vec<RawDocument> = read_raw_documents(&p("raw.jsonl"), "aa").map_err(|e| e.to_string())?;
    ensure(raw == w.raw[0], || "raw documents do not round-trip".into())?;
    let corpus = load_corpus(&p("raw.jsonl"), "aa", &LoaderOptions::unfiltered()).map_err(|e| e.to_string())?;
    ensure(corpus == w.corpus.side1, || "loaded corpus differs from the generated one".into())?;
    corpus.save(&p("corpus.json")).map_err(|e| e.to_string())?;
    ensure(Corpus::load_serialized(&p("corpus.json")).map_err(|e| e.to_string())? == corpus, || "corpus does not round-trip".into())?;

    // Dictionary.
    let (v1, v2) = (&w.corpus.side1.vocabulary, &w.corpus.side2.vocabulary);
    w.dictionary.write_tsv(&p("dict.tsv"), v1, v2).map_err(|e| e.to_string())?;
    let (dict, report) = load_dictionary(&p("dict.tsv"), v1, v2).map_err(|e| e.to_string())?;
    ensure(dict == w.dictionary && report.retained == dict.len(), || "dictionary does not round-trip".into())?;

    // Transfer matrices.
    let pair = build_transfer_pair(&w.corpus, &w.dictionary, None, OverlapCount::Pairs);
    for (s, m) in pair.iter().enumerate() {
        let (t, src) = (w.corpus.side(s), w.corpus.side(1 - s));
        m.write_tsv(&p("transfer.tsv"), t, src).map_err(|e| e.to_string())?;
        let back = TransferMatrix::read_tsv(&p("transfer.tsv"), s, t, src).map_err(|e| e.to_string())?;
        ensure(&back == m, || format!("transfer matrix {s} does not round-trip"))?;
    }

    // Annealing log.
    let mut input = TrainInput::new(ModelKind::SoftLink, small_hp(10), &w.corpus);
    input.transfer = Some(pair);
    input.anneal = AnnealConfig {
        schedule: AnnealSchedule::Fixed,
        interval: 10,
        ..AnnealConfig::default()
    };
    let out = train(&input).map_err(|e| e.to_string())?;
    write_event_log(&p("anneal.jsonl"), &out.events).map_err(|e| e.to_string())?;
    ensure(read_event_log(&p("anneal.jsonl")).map_err(|e| e.to_string())? == out.events, || "event log does not round-trip".into())?;

    // Reference corpus.
    write_reference(&p("reference.jsonl"), &w.reference_raw).map_err(|e| e.to_string())?;
    let back = ReferenceCorpus::load(&p("reference.jsonl"), v1, v2).map_err(|e| e.to_string())?;
    ensure(back == w.reference().unwrap(), || "reference does not round-trip".into())?;

    // Evaluation report.
    let mut report = EvalReport {
        cnpmi_mean: Some(0.25),
        cnpmi_per_topic: Some(vec![0.2, 0.3]),
        lis_final: Some(0.6),
        ..EvalReport::default()
    };
    report.metadata.insert("note".into(), "x".into());
    let text = serde_json::to_string(&report).unwrap();
    ensure(serde_json::from_str::<EvalReport>(&text).unwrap() == report, || "report does not round-trip".into())?;

    // Held-out inference is deterministic too.
    let test = w.heldout(1).map_err(|e| e.to_string())?;
    let a = infer_heldout(&out.model, &test, 50, 3).map_err(|e| e.to_string())?;
    let b = infer_heldout(&out.model, &test, 50, 3).map_err(|e| e.to_string())?;
    ensure(a == b, || "inference not deterministic".into())?;

    Ok("byte-identical models for all five kinds; 8 file formats round-trip".into())
}
