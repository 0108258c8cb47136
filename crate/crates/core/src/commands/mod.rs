//! The pipeline stages behind each subcommand.
//!
//! Each `cmd_*` function reads its inputs from disk, writes its artifacts and
//! a [`RunManifest`] beside them, and prints a human-readable summary to `out`.
//! The in-memory stages they call are public for library use.

mod settings;

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::artifact::{ArtifactError, Model};
use crate::config::ConfigError;
use crate::confusion::{build_groups, ConfusionError, ConfusionGroups, ConfusionStats};
use crate::corpus::{
    clean, ingest, split_and_balance, CorpusConfig, CorpusEntry, CorpusError, CorpusManifest,
    CorpusSplit, LabelMap, ManifestError, SplitKind,
};
use crate::features::featurize_batch;
use crate::metrics::{report, ConfusionMatrix, EvaluationReport, MetricsError};
use crate::network::{
    train, Architecture, EpochMetrics, Example, PredictError, Prediction, TrainError,
};
use crate::run::RunManifest;
use crate::tokenizer::{tokenize_bytes, Trim};
use crate::vocabulary::{build_vocabulary, ClassFiles, VocabError};
use crate::ClassId;

pub use settings::TrainSettings;

/// A failed command, classified by exit status.
#[derive(Debug, Error)]
pub enum CommandError {
    /// Bad arguments or config file; exit status 1.
    #[error("{0}")]
    Usage(String),
    /// Unusable corpus, manifest or input data; exit status 2.
    #[error("{0}")]
    Data(String),
    /// Unreadable or inconsistent model artifact; exit status 3.
    #[error("{0}")]
    Model(String),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Usage(_) => 1,
            CommandError::Data(_) => 2,
            CommandError::Model(_) => 3,
        }
    }
}

macro_rules! classify {
    ($variant:ident: $($err:ty),+) => {
        $(impl From<$err> for CommandError {
            fn from(e: $err) -> Self {
                CommandError::$variant(e.to_string())
            }
        })+
    };
}

classify!(Usage: ConfigError);
classify!(Data: CorpusError, ManifestError, VocabError, TrainError, MetricsError, ConfusionError, io::Error);
classify!(Model: ArtifactError, PredictError);

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CommandError> {
    std::fs::write(path, contents)
        .map_err(|e| CommandError::Data(format!("cannot write {}: {e}", path.display())))
}

/// `<path><suffix>`
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

pub struct CorpusBuild {
    pub manifest: CorpusManifest,
    pub split: CorpusSplit,
    /// Stage counters in pipeline order.
    pub counters: Vec<(&'static str, usize)>,
}

/// Ingest, filter, exclude and split the tree under `root`.
pub fn build_corpus(root: &Path, config: &CorpusConfig) -> Result<CorpusBuild, CommandError> {
    let ingested = ingest(root)?;
    let files_ingested = ingested.files.len();
    let (entries, labels, stats) = clean(ingested.files, config)?;
    let split = split_and_balance(
        entries,
        &labels,
        config.fractions,
        config.vocab_fraction,
        config.seed,
    )?;
    let manifest = CorpusManifest::from_split(root.display().to_string(), labels, &split);
    let counters = vec![
        ("files_ingested", files_ingested),
        ("skipped_no_extension", ingested.skipped_no_extension),
        ("unreadable", ingested.unreadable),
        ("dropped_binary", stats.dropped_binary),
        ("dropped_rare_extension", stats.dropped_rare_extension),
        ("dropped_multi_extension", stats.dropped_multi_extension),
        ("classes", manifest.labels.len()),
        ("train", split.train.len()),
        ("validation", split.validation.len()),
        ("test", split.test.len()),
        ("vocab", split.vocab_subset.len()),
    ];
    Ok(CorpusBuild {
        manifest,
        split,
        counters,
    })
}

pub fn cmd_build_corpus(
    root: &Path,
    config: Option<&Path>,
    manifest_out: &Path,
    out: &mut dyn Write,
) -> Result<(), CommandError> {
    let config = match config {
        Some(path) => CorpusConfig::read(path)?,
        None => CorpusConfig::default(),
    };
    let mut run = RunManifest::new("build-corpus", config.to_text(), config.seed);
    let build = build_corpus(root, &config)?;
    build.manifest.write(manifest_out)?;
    run.corpus_digest = Some(build.manifest.digest());
    for &(key, value) in &build.counters {
        run.count(key, value);
        writeln!(out, "{key}\t{value}")?;
    }
    run.finish(manifest_out)?;
    Ok(())
}

pub struct Training {
    pub model: Model<f64>,
    pub log: Vec<EpochMetrics>,
    pub counters: Vec<(&'static str, usize)>,
}

/// Build the vocabulary from the vocabulary subset, featurize, and train.
pub fn train_model(
    split: &CorpusSplit,
    labels: &LabelMap,
    settings: &TrainSettings,
) -> Result<Training, CommandError> {
    let mut classes: ClassFiles = ClassFiles::new();
    for e in &split.vocab_subset {
        classes.entry(e.label).or_default().push(&e.content);
    }
    if classes.is_empty() {
        return Err(CommandError::Data("the vocabulary subset is empty".into()));
    }
    let vocab = build_vocabulary(&classes, settings.vocab)?;
    let train_trim = if settings.trim_training_features {
        settings.trim()
    } else {
        Trim::NONE
    };
    let train_batch = featurize_batch(&split.train, &vocab, train_trim);
    let validation_batch = featurize_batch(&split.validation, &vocab, Trim::NONE);
    let examples = |vectors: &[crate::features::FeatureVector]| -> Vec<Example<f64>> {
        vectors.iter().filter_map(Example::from_features).collect()
    };
    let train_set = examples(&train_batch.vectors);
    let validation = examples(&validation_batch.vectors);
    let architecture = Architecture {
        input_dim: vocab.dimension(),
        hidden: settings.hidden.clone(),
        output_dim: labels.len(),
        dropout_rate: settings.dropout_rate,
        activation: settings.activation,
    };
    let outcome = train(architecture, &train_set, &validation, &settings.train)?;
    let counters = vec![
        ("vocab_tokens", vocab.tokens().len()),
        ("vocab_bigrams", vocab.bigrams().len()),
        ("dimension", vocab.dimension()),
        ("train_examples", train_set.len()),
        ("validation_examples", validation.len()),
        ("dropped_unfeaturizable_train", train_batch.dropped),
        (
            "dropped_unfeaturizable_validation",
            validation_batch.dropped,
        ),
    ];
    let params = outcome.params.bind(vocab.digest(), labels.clone());
    let model = Model::new(params, vocab, settings.train.clone())?;
    Ok(Training {
        model,
        log: outcome.log,
        counters,
    })
}

fn epoch_line(m: &EpochMetrics) -> String {
    let accuracy = m
        .validation_accuracy
        .map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
    format!(
        "epoch {}\tloss {:.6}\tvalidation_accuracy {accuracy}",
        m.epoch, m.train_loss
    )
}

pub fn cmd_train(
    manifest_path: &Path,
    config: Option<&Path>,
    model_out: &Path,
    out: &mut dyn Write,
) -> Result<(), CommandError> {
    let settings = match config {
        Some(path) => TrainSettings::read(path)?,
        None => TrainSettings::default(),
    };
    let mut run = RunManifest::new("train", settings.to_text(), settings.train.seed);
    let manifest = CorpusManifest::read(manifest_path)?;
    let split = manifest.load_split()?;
    let training = train_model(&split, &manifest.labels, &settings)?;
    for m in &training.log {
        writeln!(out, "{}", epoch_line(m))?;
    }
    let bytes = training.model.to_bytes();
    write_file(model_out, &bytes)?;
    run.corpus_digest = Some(manifest.digest());
    run.vocab_digest = Some(training.model.vocabulary.digest());
    run.model_digest = Some(crate::hashing::content_digest(&bytes));
    for &(key, value) in &training.counters {
        run.count(key, value);
    }
    run.finish(model_out)?;
    Ok(())
}

fn load_model(path: &Path) -> Result<Model<f64>, CommandError> {
    Model::load(path).map_err(|e| CommandError::Model(format!("{}: {e}", path.display())))
}

/// One tab-separated line per input. Only the content is read; the input's
/// name appears in the output but never reaches the model.
pub fn predict_line(model: &Model<f64>, path: &Path, top_k: usize) -> String {
    let shown = path.display();
    let content = match std::fs::read(path) {
        Ok(c) => c,
        Err(e) => return format!("{shown}\terror\tunreadable: {e}"),
    };
    match model.predict(&content) {
        Ok(p) => {
            let name = |c: ClassId| model.labels().name(c).unwrap_or("?").to_string();
            let top: Vec<String> = p
                .top_raw(top_k)
                .into_iter()
                .map(|(c, v)| format!("{}:{v:.6}", name(c)))
                .collect();
            format!(
                "{shown}\t{}\t{:.6}\t{}",
                name(p.predicted),
                p.probability(),
                top.join(",")
            )
        }
        Err(PredictError::Features(_)) => format!("{shown}\terror\tunfeaturizable"),
        Err(e) => format!("{shown}\terror\t{e}"),
    }
}

pub fn cmd_predict(
    model: &Path,
    inputs: &[PathBuf],
    top_k: usize,
    out: &mut dyn Write,
) -> Result<(), CommandError> {
    if top_k == 0 {
        return Err(CommandError::Usage("top-k must be at least 1".into()));
    }
    let model = load_model(model)?;
    let lines: Vec<String> = inputs
        .par_iter()
        .map(|p| predict_line(&model, p, top_k))
        .collect();
    for line in lines {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Predictions for every featurizable entry, in input order, plus the count
/// of entries that had no tokens.
pub fn predict_entries(
    model: &Model<f64>,
    entries: &[CorpusEntry],
) -> (Vec<(ClassId, Prediction<f64>)>, usize) {
    let results: Vec<_> = entries
        .par_iter()
        .map(|e| (e.label, model.predict(&e.content)))
        .collect();
    let total = results.len();
    let kept: Vec<_> = results
        .into_iter()
        .filter_map(|(label, p)| p.ok().map(|p| (label, p)))
        .collect();
    let dropped = total - kept.len();
    (kept, dropped)
}

pub struct Evaluation {
    pub matrix: ConfusionMatrix,
    pub report: EvaluationReport<f64>,
    pub dropped: usize,
}

pub fn evaluate(model: &Model<f64>, entries: &[CorpusEntry]) -> Result<Evaluation, CommandError> {
    let (predictions, dropped) = predict_entries(model, entries);
    let mut matrix = ConfusionMatrix::new(model.labels().len());
    for (truth, p) in &predictions {
        matrix.accumulate(*truth, p.predicted)?;
    }
    Ok(Evaluation {
        report: report(&matrix)?,
        matrix,
        dropped,
    })
}

/// T and S over `validation` at the default thresholds, and the groups they induce.
pub fn confusion_analysis(
    model: &Model<f64>,
    validation: &[CorpusEntry],
) -> Result<(ConfusionStats<f64>, ConfusionGroups), CommandError> {
    let (predictions, _) = predict_entries(model, validation);
    if predictions.is_empty() {
        return Err(CommandError::Data(
            "the validation split has no featurizable entries".into(),
        ));
    }
    let stats = ConfusionStats::from_predictions(&predictions, model.labels().len())?;
    let groups = build_groups(&stats)?;
    Ok((stats, groups))
}

/// Writes `<report>` (table), `<report>.tsv`, `<report>.confusion.tsv` and,
/// with `groups`, `<report>.groups` and `<report>.ts.tsv`.
pub fn cmd_eval(
    model_path: &Path,
    manifest_path: &Path,
    split: SplitKind,
    report_out: &Path,
    groups: bool,
    out: &mut dyn Write,
) -> Result<(), CommandError> {
    let model = load_model(model_path)?;
    let manifest = CorpusManifest::read(manifest_path)?;
    if manifest.labels != *model.labels() {
        return Err(CommandError::Data(
            "the manifest's classes differ from the model's".into(),
        ));
    }
    let entries = manifest.load(split)?;
    if entries.is_empty() {
        return Err(CommandError::Data(format!(
            "split `{}` has no entries",
            split.name()
        )));
    }
    let eval = evaluate(&model, &entries)?;
    let labels = model.labels();
    write_file(report_out, eval.report.to_table(labels))?;
    write_file(&with_suffix(report_out, ".tsv"), eval.report.to_tsv(labels))?;
    write_file(
        &with_suffix(report_out, ".confusion.tsv"),
        eval.matrix.to_tsv(labels),
    )?;
    let r = &eval.report;
    writeln!(out, "split\t{}", split.name())?;
    writeln!(out, "evaluated\t{}", r.total)?;
    writeln!(out, "unfeaturizable\t{}", eval.dropped)?;
    writeln!(out, "accuracy\t{:.4}", r.accuracy)?;
    writeln!(
        out,
        "micro\tP {:.4}\tR {:.4}\tF1 {:.4}",
        r.micro.precision, r.micro.recall, r.micro.f1
    )?;
    writeln!(
        out,
        "macro\tP {:.4}\tR {:.4}\tF1 {:.4}",
        r.macro_avg.precision, r.macro_avg.recall, r.macro_avg.f1
    )?;
    let mut run = RunManifest::new(
        "eval",
        format!("split = {}\n", split.name()),
        model.train_config.seed,
    );
    run.corpus_digest = Some(manifest.digest());
    run.vocab_digest = Some(model.vocabulary.digest());
    run.model_digest = Some(model.digest());
    run.count("evaluated", r.total as usize);
    run.count("dropped_unfeaturizable", eval.dropped);
    if groups {
        let validation = manifest.load(SplitKind::Validation)?;
        let (stats, found) = confusion_analysis(&model, &validation)?;
        let table = found.to_table(labels);
        write_file(&with_suffix(report_out, ".groups"), &table)?;
        write_file(&with_suffix(report_out, ".ts.tsv"), stats.to_tsv(labels))?;
        writeln!(out, "confusion groups")?;
        write!(out, "{table}")?;
        run.count("confusion_groups", found.groups.len());
    }
    run.finish(report_out)?;
    Ok(())
}

pub fn cmd_tokenize(input: &Path, trim: Trim, out: &mut dyn Write) -> Result<(), CommandError> {
    let content = std::fs::read(input)
        .map_err(|e| CommandError::Data(format!("cannot read {}: {e}", input.display())))?;
    let stream = tokenize_bytes(&content);
    for token in trim.window(&stream.tokens) {
        writeln!(out, "{token}")?;
    }
    Ok(())
}
