use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mltm_core::corpus::{load_corpus, load_heldout, pair_corpora, read_raw_documents, read_stopwords, write_raw_documents, BilingualCorpus, Corpus, LoaderOptions};
use mltm_core::dictionary::{load_dictionary, BilingualDictionary};
use mltm_core::eval::cnpmi::write_reference;
use mltm_core::eval::{
    classify_crosslingual, cnpmi_model, generate_synthetic, EvalReport, DirectionF1, ReferenceCorpus, SyntheticConfig,
    CLASSIFIER_NOTE,
};
use mltm_core::models::{infer_heldout, train, TopicModel, TrainInput};
use mltm_core::schedule::{compute_lis, write_event_log};
use mltm_core::transfer::{build_transfer_pair, Scope, FocusConfig, TransferMatrix};
use mltm_core::{Error, Result};
use serde_json::json;

use crate::config::{require, RunConfig};
use crate::manifest::Manifest;
use crate::{Cli, Command, EvalArgs, Evaluation, InferArgs, InspectArgs, SynthArgs, TrainArgs};

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.output_dir {
        cfg.paths.output_dir = d.clone();
    }
    cfg.hyperparams.seed = cfg.seed;
    match &cli.command {
        Command::Train(args) => cmd_train(cfg, args),
        Command::Infer(args) => cmd_infer(&cfg, args),
        Command::Eval(args) => cmd_eval(&cfg, args),
        Command::TransferBuild => cmd_transfer_build(&cfg),
        Command::Synth(args) => cmd_synth(&cfg, args),
        Command::Inspect(args) => cmd_inspect(args),
    }
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.paths.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Pretty JSON to stdout; a closed pipe is not an error.
fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match std::io::stdout().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

/// Corpora, hard links and the (subsampled) dictionary named by `cfg`.
struct Inputs {
    corpus: BilingualCorpus,
    dictionary: Option<BilingualDictionary>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let p = &cfg.paths;
    let mut options = LoaderOptions {
        remove_top_n: cfg.loader.remove_top_n,
        keep_empty: cfg.loader.keep_empty,
        ..LoaderOptions::default()
    };
    if let Some(s) = &p.stopwords {
        options.stopwords = read_stopwords(s)?;
    }
    let c1 = load_corpus(&require(&p.corpus1, "paths.corpus1")?, &p.language1, &options)?;
    let c2 = load_corpus(&require(&p.corpus2, "paths.corpus2")?, &p.language2, &options)?;
    log::info!(
        "loaded {} / {} documents, vocabularies {} / {}",
        c1.num_docs(),
        c2.num_docs(),
        c1.vocabulary.len(),
        c2.vocabulary.len()
    );
    let (corpus, report) = pair_corpora(c1, c2)?;
    for (lang, link) in &report.unmatched {
        log::warn!("link `{link}` in {lang} has no partner");
    }
    let dictionary = match &p.dictionary {
        None => None,
        Some(path) => {
            let (d, r) = load_dictionary(path, &corpus.side1.vocabulary, &corpus.side2.vocabulary)?;
            log::info!(
                "dictionary: {} concepts kept, {} out of vocabulary, {} multiword, {} duplicates",
                r.retained,
                r.dropped_oov,
                r.dropped_multiword,
                r.duplicates
            );
            if d.is_empty() {
                log::warn!("dictionary is empty; linked models reduce to per-language LDA");
            }
            Some(d.subsample(cfg.dictionary_fraction, cfg.seed)?)
        }
    };
    Ok(Inputs { corpus, dictionary })
}

fn transfer_name(corpus: &BilingualCorpus, target: usize) -> String {
    format!("transfer_{}_from_{}.tsv", corpus.side(target).language, corpus.side(1 - target).language)
}

fn build_transfer(cfg: &RunConfig, inputs: &Inputs) -> [TransferMatrix; 2] {
    let c = &inputs.corpus;
    let empty;
    let dict = match &inputs.dictionary {
        Some(d) => d,
        None => {
            empty = BilingualDictionary::empty(c.side1.vocabulary.len(), c.side2.vocabulary.len());
            &empty
        }
    };
    let pair = build_transfer_pair(c, dict, cfg.focus.as_ref(), cfg.overlap);
    for m in &pair {
        let (rows, mean_max) = m.stats();
        log::info!("transfer into side {}: {rows} nonempty rows, mean max weight {mean_max:.4}", m.target_side);
    }
    pair
}

fn cmd_train(mut cfg: RunConfig, args: &TrainArgs) -> Result<()> {
    if let Some(m) = args.model {
        cfg.model_kind = m;
    }
    if let Some(k) = args.topics {
        cfg.hyperparams.num_topics = k;
    }
    if let Some(n) = args.iterations {
        cfg.hyperparams.train_iterations = n;
    }
    if let Some(f) = args.dict_fraction {
        cfg.dictionary_fraction = f;
    }
    if let Some(t) = args.focal_threshold {
        let scope = cfg.focus.map_or(Scope::DocWise, |f| f.scope);
        cfg.focus = Some(FocusConfig { threshold: t, scope });
    }
    cfg.validate_for_training()?;
    let inputs = load_inputs(&cfg)?;
    let mut input = TrainInput::new(cfg.model_kind, cfg.hyperparams, &inputs.corpus);
    input.dictionary = inputs.dictionary.as_ref();
    input.anneal = cfg.anneal;
    input.hardlink = cfg.hardlink;
    if cfg.model_kind.uses_transfer() {
        input.transfer = Some(build_transfer(&cfg, &inputs));
    }
    log::info!(
        "training {} with K={} for {} iterations, seed {}",
        cfg.model_kind.name(),
        cfg.hyperparams.num_topics,
        cfg.hyperparams.train_iterations,
        cfg.seed
    );
    let out = train(&input)?;

    let dir = output_dir(&cfg)?;
    let mut manifest = Manifest::new("train", &cfg);
    out.model.save(&dir.join("model.json"))?;
    manifest.add_output(&dir, "model.json")?;
    write_event_log(&dir.join("anneal_log.jsonl"), &out.events)?;
    manifest.add_output(&dir, "anneal_log.jsonl")?;
    if !out.lis.values.is_empty() {
        write_json(&dir.join("lis_history.json"), &out.lis)?;
        manifest.add_output(&dir, "lis_history.json")?;
    }
    if let Some(pair) = &out.transfer {
        for (s, m) in pair.iter().enumerate() {
            let name = transfer_name(&inputs.corpus, s);
            m.write_tsv(&dir.join(&name), inputs.corpus.side(s), inputs.corpus.side(1 - s))?;
            manifest.add_output(&dir, &name)?;
        }
    }
    manifest.write(&dir, "manifest.json")?;
    log::info!("{} annealing events; wrote {}", out.events.len(), dir.display());
    Ok(())
}

fn side_for(model: &TopicModel, language: &str) -> Result<usize> {
    model
        .side_of_language(language)
        .ok_or_else(|| Error::VocabularyMismatch(format!("model has no language `{language}`")))
}

fn cmd_infer(cfg: &RunConfig, args: &InferArgs) -> Result<()> {
    let model = TopicModel::load(&args.model)?;
    let side = side_for(&model, &args.language)?;
    let heldout = load_heldout(&args.corpus, &model.vocabulary(side)?, true)?;
    let iterations = args.iterations.unwrap_or(model.hyperparams.infer_iterations);
    let theta = infer_heldout(&model, &heldout, iterations, cfg.seed)?;
    let dir = output_dir(cfg)?;
    let name = format!("theta_{}.json", args.language);
    let ids: Vec<&str> = heldout.documents.iter().map(|d| d.doc_id.as_str()).collect();
    write_json(&dir.join(&name), &json!({ "language": args.language, "doc_ids": ids, "theta": theta }))?;
    let mut manifest = Manifest::new("infer", cfg);
    manifest.add_output(&dir, &name)?;
    manifest.notes.insert("model".into(), args.model.display().to_string());
    manifest.write(&dir, &format!("manifest_infer_{}.json", args.language))?;
    log::info!("inferred {} documents with {iterations} iterations", heldout.num_docs());
    Ok(())
}

/// Language of the first record of a JSON-lines corpus file.
fn file_language(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::EmptyCorpus(path.display().to_string()))?;
    let v: serde_json::Value = serde_json::from_str(first).map_err(|e| Error::Malformed {
        path: path.to_owned(),
        line: 1,
        msg: e.to_string(),
    })?;
    v["lang"].as_str().map(str::to_owned).ok_or_else(|| Error::Malformed {
        path: path.to_owned(),
        line: 1,
        msg: "record has no `lang`".into(),
    })
}

/// Labels of the model's training documents on `side`, looked up by id in
/// the training corpus files.
fn training_labels(model: &TopicModel, side: usize, files: &[PathBuf]) -> Result<Vec<Vec<String>>> {
    let language = &model.side(side).language;
    let mut by_id: HashMap<String, Vec<String>> = HashMap::new();
    for f in files {
        if file_language(f)? == *language {
            for d in read_raw_documents(f, language)? {
                by_id.insert(d.id, d.labels.unwrap_or_default());
            }
        }
    }
    model
        .side(side)
        .doc_ids
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .cloned()
                .ok_or_else(|| Error::VocabularyMismatch(format!("no training document `{id}` in the {language} corpus")))
        })
        .collect()
}

fn cmd_eval(cfg: &RunConfig, args: &EvalArgs) -> Result<()> {
    let model = TopicModel::load(&args.model)?;
    let mut report = EvalReport::default();
    report.metadata.insert("model".into(), args.model.display().to_string());
    report.metadata.insert("model_kind".into(), model.model_kind.name().into());

    if args.which.contains(&Evaluation::Cnpmi) {
        let path = args
            .reference
            .clone()
            .or_else(|| cfg.paths.reference.clone())
            .ok_or_else(|| Error::Config("cnpmi needs --reference or paths.reference".into()))?;
        let reference = ReferenceCorpus::load(&path, &model.vocabulary(0)?, &model.vocabulary(1)?)?;
        let c = args.top_words.unwrap_or(cfg.eval.top_words);
        let (per_topic, mean) = cnpmi_model(&model, &reference, c)?;
        log::info!("CNPMI over {} reference pairs, top {c}: {mean:.4}", reference.len());
        report.cnpmi_per_topic = Some(per_topic);
        report.cnpmi_mean = Some(mean);
        report.metadata.insert("top_words".into(), c.to_string());
    }

    if args.which.contains(&Evaluation::Classify) {
        if args.test.is_empty() {
            return Err(Error::Config("classify needs at least one --test corpus".into()));
        }
        let train_files: Vec<PathBuf> = if args.train_corpus.is_empty() {
            [&cfg.paths.corpus1, &cfg.paths.corpus2].into_iter().flatten().cloned().collect()
        } else {
            args.train_corpus.clone()
        };
        let mut ccfg = cfg.eval.classify;
        ccfg.tune_thresholds |= args.tune_thresholds;
        ccfg.seed = cfg.seed;
        for test_path in &args.test {
            let test_lang = file_language(test_path)?;
            let test_side = side_for(&model, &test_lang)?;
            let train_side = if args.same_language { test_side } else { 1 - test_side };
            let test = load_heldout(test_path, &model.vocabulary(test_side)?, true)?;
            let test_theta = infer_heldout(&model, &test, model.hyperparams.infer_iterations, cfg.seed)?;
            let test_labels: Vec<Vec<String>> = test.documents.iter().map(|d| d.labels.clone()).collect();
            let train_labels = training_labels(&model, train_side, &train_files)?;
            let r = classify_crosslingual(&model.side(train_side).theta, &train_labels, &test_theta, &test_labels, &ccfg);
            log::info!(
                "{} -> {}: micro-F1 {:.4} (majority {:.4})",
                model.side(train_side).language,
                test_lang,
                r.f1_micro,
                r.majority_f1
            );
            report.f1_micro.push(DirectionF1 {
                train_language: model.side(train_side).language.clone(),
                test_language: test_lang,
                f1_micro: r.f1_micro,
                majority_f1: r.majority_f1,
            });
        }
        report.metadata.insert("classifier".into(), CLASSIFIER_NOTE.into());
    }

    if args.which.contains(&Evaluation::Lis) {
        let counts = model
            .counts
            .as_ref()
            .ok_or_else(|| Error::VocabularyMismatch("model file carries no counts".into()))?;
        let path = args
            .dictionary
            .clone()
            .or_else(|| cfg.paths.dictionary.clone())
            .ok_or_else(|| Error::Config("lis needs --dictionary or paths.dictionary".into()))?;
        let (dict, _) = load_dictionary(&path, &model.vocabulary(0)?, &model.vocabulary(1)?)?;
        let lis = compute_lis(counts, &dict, cfg.eval.lis_folds, cfg.seed, model.hyperparams.beta)?;
        log::info!("LIS over {} concepts: {lis:.4}", dict.len());
        report.lis_final = Some(lis);
    }

    let dir = output_dir(cfg)?;
    write_json(&dir.join("eval_report.json"), &report)?;
    print_json(&report)
}

fn cmd_transfer_build(cfg: &RunConfig) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    if inputs.dictionary.is_none() {
        return Err(Error::Config("transfer-build needs paths.dictionary".into()));
    }
    let pair = build_transfer(cfg, &inputs);
    let dir = output_dir(cfg)?;
    let mut manifest = Manifest::new("transfer-build", cfg);
    for (s, m) in pair.iter().enumerate() {
        let name = transfer_name(&inputs.corpus, s);
        m.write_tsv(&dir.join(&name), inputs.corpus.side(s), inputs.corpus.side(1 - s))?;
        manifest.add_output(&dir, &name)?;
    }
    manifest.write(&dir, "manifest_transfer.json")
}

fn cmd_synth(cfg: &RunConfig, args: &SynthArgs) -> Result<()> {
    let scfg = SyntheticConfig {
        num_topics: args.topics,
        vocab_size: args.vocab,
        num_docs: args.docs,
        doc_len: args.doc_len,
        dict_coverage: args.coverage,
        topic_sharpness: args.sharpness,
        word_concentration: args.concentration,
        link_fraction: args.links,
        heldout_docs: args.heldout,
        reference_pairs: args.reference_pairs,
        seed: cfg.seed,
    };
    let world = generate_synthetic(&scfg)?;
    let dir = output_dir(cfg)?;
    let langs = [world.corpus.side1.language.clone(), world.corpus.side2.language.clone()];
    let mut outputs = Vec::new();
    for s in 0..2 {
        let name = format!("corpus_{}.jsonl", langs[s]);
        write_raw_documents(&dir.join(&name), &world.raw[s])?;
        outputs.push(name);
        let name = format!("heldout_{}.jsonl", langs[s]);
        write_raw_documents(&dir.join(&name), &world.heldout_raw[s])?;
        outputs.push(name);
    }
    let dict_text: String = world.dictionary_pairs.iter().map(|(a, b)| format!("{a}\t{b}\n")).collect();
    fs::write(dir.join("dictionary.tsv"), dict_text).map_err(|e| Error::io(dir.join("dictionary.tsv"), e))?;
    outputs.push("dictionary.tsv".into());
    write_reference(&dir.join("reference.jsonl"), &world.reference_raw)?;
    outputs.push("reference.jsonl".into());
    write_json(
        &dir.join("truth.json"),
        &json!({ "config": scfg, "phi": world.phi, "theta": world.theta }),
    )?;
    outputs.push("truth.json".into());

    // A run config that trains on exactly these files.
    let mut run = RunConfig {
        seed: cfg.seed,
        ..RunConfig::default()
    };
    run.hyperparams.num_topics = args.topics;
    run.hyperparams.seed = cfg.seed;
    run.loader.remove_top_n = 0;
    run.paths.corpus1 = Some(format!("corpus_{}.jsonl", langs[0]).into());
    run.paths.corpus2 = Some(format!("corpus_{}.jsonl", langs[1]).into());
    run.paths.language1 = langs[0].clone();
    run.paths.language2 = langs[1].clone();
    run.paths.dictionary = Some("dictionary.tsv".into());
    run.paths.reference = Some("reference.jsonl".into());
    run.paths.output_dir = "run".into();
    fs::write(dir.join("config.toml"), run.to_toml()).map_err(|e| Error::io(dir.join("config.toml"), e))?;
    outputs.push("config.toml".into());

    let mut manifest = Manifest::new("synth", cfg);
    for name in &outputs {
        manifest.add_output(&dir, name)?;
    }
    manifest.write(&dir, "manifest.json")?;
    log::info!(
        "synthetic world: {} + {} documents, {} dictionary pairs, {} reference pairs",
        world.raw[0].len(),
        world.raw[1].len(),
        world.dictionary_pairs.len(),
        world.reference_raw.len()
    );
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    let path = &args.file;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let is_manifest = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("manifest"));
    let summary = match ext {
        "json" if is_manifest => {
            let m = Manifest::read(path)?;
            json!({ "kind": "manifest", "command": m.command, "seed": m.seed, "config_sha256": m.config_sha256, "outputs": m.outputs })
        }
        "json" => inspect_model(path, args.top)?,
        "jsonl" => inspect_corpus(path)?,
        "tsv" => inspect_tsv(path)?,
        _ => return Err(Error::Config(format!("cannot tell the format of {}", path.display()))),
    };
    print_json(&summary)
}

fn inspect_model(path: &Path, top: usize) -> Result<serde_json::Value> {
    let model = TopicModel::load(path)?;
    let sides: Vec<serde_json::Value> = model
        .sides
        .iter()
        .map(|s| {
            let topics: Vec<Vec<&str>> = s
                .phi
                .iter()
                .map(|row| {
                    mltm_core::eval::top_words(row, top.min(row.len()))
                        .into_iter()
                        .map(|w| s.vocabulary[w as usize].as_str())
                        .collect()
                })
                .collect();
            json!({
                "language": s.language,
                "vocabulary": s.vocabulary.len(),
                "documents": s.doc_ids.len(),
                "top_words": topics,
            })
        })
        .collect();
    Ok(json!({
        "kind": "model",
        "model_kind": model.model_kind.name(),
        "num_topics": model.num_topics(),
        "hyperparams": model.hyperparams,
        "provenance": model.provenance,
        "has_counts": model.counts.is_some(),
        "sides": sides,
    }))
}

fn inspect_corpus(path: &Path) -> Result<serde_json::Value> {
    let lang = file_language(path)?;
    let corpus = Corpus::from_raw(&lang, read_raw_documents(path, &lang)?, &LoaderOptions { keep_empty: true, ..LoaderOptions::unfiltered() })?;
    let mut labels: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &corpus.documents {
        for l in &d.labels {
            *labels.entry(l.as_str()).or_default() += 1;
        }
    }
    Ok(json!({
        "kind": "corpus",
        "language": lang,
        "documents": corpus.num_docs(),
        "tokens": corpus.token_total(),
        "vocabulary": corpus.vocabulary.len(),
        "linked": corpus.documents.iter().filter(|d| d.link_id.is_some()).count(),
        "labels": labels,
    }))
}

fn inspect_tsv(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split('\t').collect())
        .collect();
    match lines.first().map(Vec::len) {
        Some(3) => {
            let mut rows: BTreeMap<&str, (usize, f64, f64)> = BTreeMap::new();
            for (i, f) in lines.iter().enumerate() {
                let w: f64 = f.get(2).and_then(|x| x.parse().ok()).ok_or_else(|| Error::Malformed {
                    path: path.to_owned(),
                    line: i + 1,
                    msg: "bad transfer line".into(),
                })?;
                let e = rows.entry(f[0]).or_insert((0, 0.0, 0.0));
                e.0 += 1;
                e.1 += w;
                e.2 = e.2.max(w);
            }
            let n = rows.len().max(1) as f64;
            Ok(json!({
                "kind": "transfer",
                "nonempty_rows": rows.len(),
                "entries": lines.len(),
                "mean_row_length": lines.len() as f64 / n,
                "mean_max_weight": rows.values().map(|r| r.2).sum::<f64>() / n,
                "max_row_sum_error": rows.values().map(|r| (r.1 - 1.0).abs()).fold(0.0, f64::max),
            }))
        }
        Some(2) | None => Ok(json!({ "kind": "dictionary", "pairs": lines.len() })),
        Some(n) => Err(Error::Malformed {
            path: path.to_owned(),
            line: 1,
            msg: format!("{n} columns"),
        }),
    }
}
