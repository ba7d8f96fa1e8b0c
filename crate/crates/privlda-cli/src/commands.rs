//! Command implementations; the binary's `main` only parses flags and
//! dispatches here. Everything is callable from tests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use privlda::cgs::{self, Hyperparams, TopicModel};
use privlda::corpus::{self, Corpus};
use privlda::eval;
use privlda::laplace;
use privlda::lp::{self, FlipConfig};
use privlda::model_io::{self, ModelMetadata};
use privlda::monitor::{self, PrivacyLevel};

use crate::config::{Mechanism, RunConfig};

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("cannot hash input {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Resolved config plus content hashes of every input file, embedded into
/// all artifacts so any reported number can be replayed.
fn run_info(cfg: &RunConfig) -> Result<serde_json::Value> {
    let mut inputs = BTreeMap::new();
    for path in [&cfg.train, &cfg.test, &cfg.vocab, &cfg.stopwords]
        .into_iter()
        .flatten()
    {
        inputs.insert(path.display().to_string(), sha256_hex(path)?);
    }
    Ok(serde_json::json!({
        "config": cfg.as_map(),
        "input_sha256": inputs,
    }))
}

fn load_corpus(path: &Path, vocab: Option<&Path>) -> Result<Corpus> {
    corpus::load_uci_with_vocab(path, vocab)
        .with_context(|| format!("loading corpus {}", path.display()))
}

fn require_train(cfg: &RunConfig) -> Result<&Path> {
    cfg.train
        .as_deref()
        .context("train: no training corpus given (config key `train` or flag --train)")
}

fn hyper(cfg: &RunConfig) -> Result<Hyperparams> {
    Ok(Hyperparams::new(cfg.topics, cfg.alpha, cfg.beta)?)
}

/// Files written by a training run.
#[derive(Debug)]
pub struct TrainArtifacts {
    pub model_csv: PathBuf,
    pub model_json: PathBuf,
    pub ledger_csv: Option<PathBuf>,
    pub ledger_json: Option<PathBuf>,
    pub perturbed: Option<PathBuf>,
}

struct TrainedModel {
    model: TopicModel,
    metadata_mechanism: String,
    privacy: Option<serde_json::Value>,
    monitor: Option<monitor::PrivacyMonitor>,
    perturbed: Option<lp::PerturbedBatch>,
}

fn train_with_mechanism(cfg: &RunConfig, corpus: &Corpus) -> Result<TrainedModel> {
    let hyper = hyper(cfg)?;
    match cfg.mechanism {
        Mechanism::Plain => {
            let (model, _) = cgs::train(corpus, &hyper, cfg.iters, cfg.seed, None)?;
            Ok(TrainedModel {
                model,
                metadata_mechanism: "plain".into(),
                privacy: None,
                monitor: None,
                perturbed: None,
            })
        }
        Mechanism::MonitoredWord | Mechanism::MonitoredDoc => {
            let level = match cfg.mechanism {
                Mechanism::MonitoredWord => PrivacyLevel::Word,
                _ => PrivacyLevel::document_for(corpus)?,
            };
            let run = monitor::monitored_train(corpus, &hyper, cfg.iters, cfg.seed, level)
                .map_err(|e| match e {
                    privlda::Error::DegenerateCorpus { .. } => anyhow::anyhow!(e).context(
                        "document-level monitoring is undefined for this corpus; \
                         truncate the longest documents to shrink N_max, or run with \
                         --level word",
                    ),
                    other => anyhow::anyhow!(other),
                })?;
            let summary = run.monitor.summary();
            Ok(TrainedModel {
                model: run.model,
                metadata_mechanism: cfg.mechanism.to_string(),
                privacy: Some(serde_json::json!({
                    "level": summary.level,
                    "n_removed": summary.n_removed,
                    "total_eps": summary.total_eps,
                })),
                monitor: Some(run.monitor),
                perturbed: None,
            })
        }
        Mechanism::Lp => {
            let flip = match (cfg.f, cfg.epsilon) {
                (Some(f), None) => FlipConfig::from_flip_probability(f)?,
                (None, Some(eps)) => FlipConfig::from_epsilon(eps)?,
                _ => bail!("f/epsilon: training with mechanism lp needs one of them (values only drive sweeps)"),
            };
            let batch = lp::client_perturb(corpus, &flip, cfg.seed);
            let (model, _) =
                lp::server_train(&batch, &corpus.vocab, &hyper, cfg.iters, cfg.seed)?;
            Ok(TrainedModel {
                model,
                metadata_mechanism: "lp".into(),
                privacy: Some(serde_json::json!({
                    "f": flip.flip_probability(),
                    "local_epsilon": flip.epsilon(),
                    "encoding": "binary presence vectors; token multiplicity discarded",
                })),
                monitor: None,
                perturbed: Some(batch),
            })
        }
        Mechanism::Laplace => {
            let Some(eps) = cfg.epsilon else {
                bail!("epsilon: training with mechanism laplace needs a budget (values only drive sweeps)");
            };
            let (model, _) = laplace::baseline_train(corpus, &hyper, eps, cfg.iters, cfg.seed)?;
            let scale = laplace::LaplaceConfig::new(eps, cfg.topics)?.per_entry_scale();
            Ok(TrainedModel {
                model,
                metadata_mechanism: "laplace-init".into(),
                privacy: Some(serde_json::json!({
                    "epsilon": eps,
                    "per_entry_scale": scale,
                })),
                monitor: None,
                perturbed: None,
            })
        }
    }
}

/// Trains with the configured mechanism and writes the model (CSV + JSON
/// metadata), the privacy ledger for monitored runs, and the captured
/// perturbed vectors for locally private runs.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainArtifacts> {
    let train_path = require_train(cfg)?;
    let corpus = load_corpus(train_path, cfg.vocab.as_deref())?;
    let trained = train_with_mechanism(cfg, &corpus)?;

    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create output directory {}", cfg.out.display()))?;
    let model_csv = cfg.out.join("model.csv");
    let model_json = cfg.out.join("model.json");
    model_io::save_model_csv(&trained.model, &model_csv)?;

    let mut meta = ModelMetadata::new(
        &trained.metadata_mechanism,
        &trained.model,
        cfg.iters,
        cfg.seed,
    );
    meta.privacy = trained.privacy.clone();
    meta.run = Some(run_info(cfg)?);
    model_io::save_metadata(&meta, &model_json)?;

    let (ledger_csv, ledger_json) = if let Some(mon) = &trained.monitor {
        let csv_path = cfg.out.join("ledger.csv");
        let json_path = cfg.out.join("ledger.json");
        mon.write_csv(&csv_path)?;
        let mut summary = serde_json::to_value(mon.summary())?;
        summary
            .as_object_mut()
            .expect("summary serializes to an object")
            .insert("run".into(), run_info(cfg)?);
        fs::write(&json_path, serde_json::to_string_pretty(&summary)? + "\n")?;
        (Some(csv_path), Some(json_path))
    } else {
        (None, None)
    };

    let perturbed = if let Some(batch) = &trained.perturbed {
        let path = cfg.out.join("perturbed.txt");
        lp::write_perturbed_vectors(&path, batch)?;
        Some(path)
    } else {
        None
    };

    log::info!(
        "trained mechanism={} model={}",
        trained.metadata_mechanism,
        model_csv.display()
    );
    Ok(TrainArtifacts {
        model_csv,
        model_json,
        ledger_csv,
        ledger_json,
        perturbed,
    })
}

/// Scores a serialized model on a test corpus; writes `report.json`.
pub fn cmd_eval(cfg: &RunConfig, model_csv: &Path) -> Result<PathBuf> {
    let meta_path = model_csv.with_extension("json");
    let meta = model_io::load_metadata(&meta_path)
        .with_context(|| format!("loading model metadata {}", meta_path.display()))?;
    let model = model_io::load_model_csv(model_csv, meta.alpha, meta.beta)
        .with_context(|| format!("loading model {}", model_csv.display()))?;

    let test_path = cfg
        .test
        .as_deref()
        .context("test: no test corpus given (config key `test` or flag --test)")?;
    let test = load_corpus(test_path, cfg.vocab.as_deref())?;
    let test = corpus::restrict_to_vocabulary(&test, &model.vocab)?;

    let report = eval::perplexity(&model, &test, cfg.fold_in_iters, cfg.seed)?;

    fs::create_dir_all(&cfg.out)?;
    let report_path = cfg.out.join("report.json");
    let payload = serde_json::json!({
        "perplexity": report.perplexity,
        "n_test_tokens": report.n_test_tokens,
        "fold_in_iters": report.fold_in_iters,
        "seed": report.seed,
        "model": model_csv.display().to_string(),
        "run": run_info(cfg)?,
    });
    fs::write(&report_path, serde_json::to_string_pretty(&payload)? + "\n")?;
    println!("perplexity {}", report.perplexity);
    Ok(report_path)
}

#[derive(Debug, Clone)]
struct SweepPoint {
    value: Option<f64>,
    seed: u64,
}

#[derive(Debug, Clone)]
struct SweepRun {
    mechanism: Mechanism,
    value: Option<f64>,
    f: Option<f64>,
    epsilon: Option<f64>,
    seed: u64,
    perplexity: f64,
}

fn sweep_run(cfg: &RunConfig, train: &Corpus, test: &Corpus, point: &SweepPoint) -> Result<SweepRun> {
    let hyper = hyper(cfg)?;
    let (model, f, epsilon) = match (cfg.mechanism, point.value) {
        (Mechanism::Lp, Some(f)) => {
            let flip = FlipConfig::from_flip_probability(f)?;
            let outcome = lp::lp_train(train, &flip, &hyper, cfg.iters, point.seed)?;
            (outcome.model, Some(f), Some(flip.epsilon()))
        }
        (Mechanism::Laplace, Some(eps)) => {
            let (model, _) = laplace::baseline_train(train, &hyper, eps, cfg.iters, point.seed)?;
            (model, None, Some(eps))
        }
        (Mechanism::Plain, None) => {
            let (model, _) = cgs::train(train, &hyper, cfg.iters, point.seed, None)?;
            (model, None, None)
        }
        (Mechanism::MonitoredWord | Mechanism::MonitoredDoc, None) => {
            let level = match cfg.mechanism {
                Mechanism::MonitoredWord => PrivacyLevel::Word,
                _ => PrivacyLevel::document_for(train)?,
            };
            let run = monitor::monitored_train(train, &hyper, cfg.iters, point.seed, level)?;
            (run.model, None, None)
        }
        (mechanism, value) => bail!("sweep: mechanism {mechanism} with value {value:?} is not a valid combination"),
    };
    let report = eval::perplexity(&model, test, cfg.fold_in_iters, point.seed)?;
    Ok(SweepRun {
        mechanism: cfg.mechanism,
        value: point.value,
        f,
        epsilon,
        seed: point.seed,
        perplexity: report.perplexity,
    })
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Files written by a sweep.
#[derive(Debug)]
pub struct SweepArtifacts {
    pub runs_csv: PathBuf,
    pub medians_csv: PathBuf,
    pub summary_json: PathBuf,
}

/// Runs the configured mechanism over every (value, seed) pair and reports
/// per-run perplexities plus per-value medians. Values are flip
/// probabilities for `lp` and budgets for `laplace`; `plain` and the
/// monitored mechanisms take no value.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepArtifacts> {
    let train_path = require_train(cfg)?;
    let train = load_corpus(train_path, cfg.vocab.as_deref())?;
    let test_path = cfg
        .test
        .as_deref()
        .context("test: sweeps score on a test corpus (config key `test` or flag --test)")?;
    let test = load_corpus(test_path, cfg.vocab.as_deref())?;
    let test = corpus::restrict_to_vocabulary(&test, &train.vocab)?;

    let takes_value = matches!(cfg.mechanism, Mechanism::Lp | Mechanism::Laplace);
    let values: Vec<Option<f64>> = if takes_value {
        if cfg.values.is_empty() {
            bail!("values: sweep over {} needs at least one value", cfg.mechanism);
        }
        if cfg.f.is_some() || cfg.epsilon.is_some() {
            log::warn!("f/epsilon: ignored by sweep; the value list drives each run");
        }
        cfg.values.iter().copied().map(Some).collect()
    } else {
        if !cfg.values.is_empty() {
            log::warn!(
                "values: mechanism {} takes no sweep value; ignoring {:?}",
                cfg.mechanism,
                cfg.values
            );
        }
        vec![None]
    };
    if cfg.seeds.is_empty() {
        bail!("seeds: sweep needs at least one seed");
    }

    let points: Vec<SweepPoint> = values
        .iter()
        .flat_map(|&value| cfg.seeds.iter().map(move |&seed| SweepPoint { value, seed }))
        .collect();
    let runs: Vec<SweepRun> = points
        .par_iter()
        .map(|p| sweep_run(cfg, &train, &test, p))
        .collect::<Result<_>>()?;

    fs::create_dir_all(&cfg.out)?;
    let runs_csv = cfg.out.join("sweep_runs.csv");
    {
        let mut w = csv::Writer::from_path(&runs_csv)?;
        w.write_record(["mechanism", "epsilon_or_f", "seed", "perplexity"])?;
        for run in &runs {
            let native = match run.mechanism {
                Mechanism::Lp => run.f,
                Mechanism::Laplace => run.epsilon,
                _ => None,
            };
            w.write_record([
                run.mechanism.to_string(),
                fmt_opt(native),
                run.seed.to_string(),
                run.perplexity.to_string(),
            ])?;
        }
        w.flush()?;
    }

    let medians_csv = cfg.out.join("sweep.csv");
    {
        let mut w = csv::Writer::from_path(&medians_csv)?;
        w.write_record(["mechanism", "value", "f", "epsilon", "median_perplexity", "n_seeds"])?;
        for &value in &values {
            let group: Vec<&SweepRun> = runs.iter().filter(|r| r.value == value).collect();
            let med = median(group.iter().map(|r| r.perplexity).collect());
            let first = group.first().expect("every value has runs");
            w.write_record([
                cfg.mechanism.to_string(),
                fmt_opt(value),
                fmt_opt(first.f),
                fmt_opt(first.epsilon),
                med.to_string(),
                group.len().to_string(),
            ])?;
        }
        w.flush()?;
    }

    let summary_json = cfg.out.join("sweep.json");
    fs::write(
        &summary_json,
        serde_json::to_string_pretty(&serde_json::json!({
            "mechanism": cfg.mechanism.to_string(),
            "n_runs": runs.len(),
            "run": run_info(cfg)?,
        }))? + "\n",
    )?;
    Ok(SweepArtifacts {
        runs_csv,
        medians_csv,
        summary_json,
    })
}

/// Files written by ingestion.
#[derive(Debug)]
pub struct IngestArtifacts {
    pub train: PathBuf,
    pub test: PathBuf,
    pub stats_json: PathBuf,
}

/// Loads a raw bag-of-words file, splits off a test set, prunes the training
/// vocabulary (stopwords plus a frequency cutoff), carries that vocabulary
/// over to the test split, and writes both back out.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestArtifacts> {
    let input = require_train(cfg)?;
    let raw = load_corpus(input, cfg.vocab.as_deref())?;
    let n_test = cfg.n_test.unwrap_or(0);
    let (train_raw, test_raw) = corpus::split_train_test(&raw, n_test, cfg.seed)?;

    let stopwords = match &cfg.stopwords {
        Some(path) => corpus::load_stopwords(path)
            .with_context(|| format!("loading stopwords {}", path.display()))?,
        None => Default::default(),
    };
    let top_v = cfg.top_v.unwrap_or_else(|| raw.vocab_size());
    let train = corpus::preprocess(&train_raw, &stopwords, top_v)?;
    let test = corpus::restrict_to_vocabulary(&test_raw, &train.vocab)?;

    fs::create_dir_all(&cfg.out)?;
    let train_path = cfg.out.join("train.txt");
    let test_path = cfg.out.join("test.txt");
    corpus::save_uci_bag_of_words(&train, &train_path)?;
    corpus::save_uci_bag_of_words(&test, &test_path)?;

    let stats = |c: &Corpus| {
        serde_json::json!({
            "docs": c.n_docs(),
            "tokens": c.total_tokens(),
            "vocab": c.vocab_size(),
            "max_doc_len": c.max_doc_len(),
        })
    };
    let stats_json = cfg.out.join("ingest.json");
    fs::write(
        &stats_json,
        serde_json::to_string_pretty(&serde_json::json!({
            "raw": stats(&raw),
            "train": stats(&train),
            "test": stats(&test),
            "run": run_info(cfg)?,
        }))? + "\n",
    )?;
    Ok(IngestArtifacts {
        train: train_path,
        test: test_path,
        stats_json,
    })
}

/// Options for the exhaustive-search diagnostic.
#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub topics: usize,
    pub vocab: usize,
    pub removed: usize,
    pub instances: usize,
    pub max_count: u32,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub instance_file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct InstanceFile {
    alpha: f64,
    beta: f64,
    removed: usize,
    word: usize,
    topic_word: Vec<Vec<u32>>,
    doc_topic: Vec<u32>,
}

fn check_instance(
    counts: &privlda::cgs::CountMatrices,
    m: usize,
    t: usize,
    hyper: &Hyperparams,
    removed: usize,
) -> Result<(f64, f64, u128, bool)> {
    let dist = cgs::full_conditional(counts, m, t, hyper);
    let pseudo = monitor::pseudo_distribution(counts, m, t, hyper, removed)?;
    let fast = monitor::per_sampling_epsilon(&dist, &pseudo);
    let outcome = monitor::brute_force_epsilon_detailed(counts, m, t, hyper, removed)?;
    Ok((
        fast,
        outcome.epsilon,
        outcome.partitions_checked,
        fast >= outcome.epsilon,
    ))
}

/// Compares the per-sampling bound against the exhaustive partition search,
/// either on a user-provided instance or on randomly generated ones. Exits
/// with an error if the bound ever falls below the exhaustive maximum.
pub fn cmd_oracle(opts: &OracleOptions) -> Result<()> {
    let mut violations = 0usize;
    if let Some(path) = &opts.instance_file {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read instance file {}", path.display()))?;
        let instance: InstanceFile = serde_json::from_str(&text)
            .with_context(|| format!("bad instance file {}", path.display()))?;
        let k = instance.topic_word.len();
        let counts = privlda::cgs::CountMatrices::from_nested(
            instance.topic_word.clone(),
            instance.doc_topic.clone(),
        )?;
        let hyper = Hyperparams::new(k, instance.alpha, instance.beta)?;
        let (fast, exact, partitions, sound) =
            check_instance(&counts, 0, instance.word, &hyper, instance.removed)?;
        println!("instance  fast={fast}  exhaustive={exact}  partitions={partitions}");
        if !sound {
            violations += 1;
        }
    } else {
        let hyper = Hyperparams::new(opts.topics, opts.alpha, opts.beta)?;
        println!("instance,fast,exhaustive,partitions,status");
        for i in 0..opts.instances {
            let (counts, m, t) =
                monitor::random_instance(opts.topics, opts.vocab, opts.max_count, opts.seed + i as u64);
            let (fast, exact, partitions, sound) =
                check_instance(&counts, m, t, &hyper, opts.removed)?;
            let status = if sound { "ok" } else { "SOUNDNESS-VIOLATION" };
            println!("{i},{fast},{exact},{partitions},{status}");
            if !sound {
                violations += 1;
            }
        }
    }
    if violations > 0 {
        bail!("{violations} instance(s) where the bound fell below the exhaustive maximum");
    }
    Ok(())
}
