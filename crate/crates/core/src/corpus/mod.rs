//! Corpus ingestion, filtering and splitting.
//!
//! A corpus is a directory tree whose file extensions are the class labels.
//! The cleaning pipeline is: [`ingest`], drop non-textual files with
//! [`is_textual`], drop rare extensions with
//! [`filter_by_extension_frequency`], drop contents seen under several
//! extensions with [`exclude_multi_extension`], then [`split_and_balance`].

mod config;
pub mod manifest;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;
use walkdir::WalkDir;

use crate::hashing::{content_digest, derive_seed};
use crate::ClassId;

pub use config::{CorpusConfig, SplitFractions};
pub use manifest::{CorpusManifest, ManifestError, ManifestRecord, SplitKind};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus root {path}: {source}")]
    Root {
        path: String,
        source: std::io::Error,
    },
    #[error("empty corpus after frequency filter")]
    EmptyAfterFilter,
    #[error("class `{class}` has {count} samples, at least 4 are required")]
    ClassTooSmall { class: String, count: usize },
    #[error("split fractions must be positive and sum to 1, got {0:?}")]
    Fractions(SplitFractions),
    #[error("vocab fraction must lie in [0, 1], got {0}")]
    VocabFraction(f64),
    #[error("content {0} appears more than once")]
    DuplicateDigest(String),
    #[error("no training samples left after the holdout")]
    NoTrainingSamples,
}

/// A file found under the corpus root, before labels are assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub content: Vec<u8>,
    /// Lowercase, no leading dot.
    pub extension: String,
    /// Path relative to the corpus root, `/`-separated.
    pub path: String,
    pub content_digest: String,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, extension: impl Into<String>, content: Vec<u8>) -> Self {
        let content_digest = content_digest(&content);
        SourceFile {
            content,
            extension: extension.into(),
            path: path.into(),
            content_digest,
        }
    }
}

/// One labelled sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub content: Vec<u8>,
    pub label: ClassId,
    pub extension: String,
    pub path: String,
    pub content_digest: String,
}

impl CorpusEntry {
    pub fn into_source(self) -> SourceFile {
        SourceFile {
            content: self.content,
            extension: self.extension,
            path: self.path,
            content_digest: self.content_digest,
        }
    }
}

/// Extension classes in lexicographic order; class id = position.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelMap {
    classes: Vec<String>,
    index: HashMap<String, ClassId>,
}

impl LabelMap {
    /// Build from any collection of extensions; duplicates are merged.
    pub fn new<I, S>(extensions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let classes: Vec<String> = extensions
            .into_iter()
            .map(Into::into)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        LabelMap { classes, index }
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn id(&self, extension: &str) -> Option<ClassId> {
        self.index.get(extension).copied()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.classes.get(id).map(String::as_str)
    }
}

/// Result of walking a corpus root.
#[derive(Debug, Default)]
pub struct Ingested {
    pub files: Vec<SourceFile>,
    pub skipped_no_extension: usize,
    pub unreadable: usize,
}

/// Extension of a file name: the lowercased text after the last dot.
///
/// `None` for names without a dot, with a trailing dot, or consisting of a
/// leading dot only (`.gitignore`).
pub fn extension_of(file_name: &str) -> Option<String> {
    let dot = file_name.rfind('.')?;
    let (stem, ext) = (&file_name[..dot], &file_name[dot + 1..]);
    if stem.is_empty() || ext.is_empty() || ext.contains(['/', '\\']) {
        return None;
    }
    Some(ext.to_lowercase())
}

/// Collect every regular file under `root` that has an extension.
pub fn ingest(root: &Path) -> Result<Ingested, CorpusError> {
    let root_err = |source| CorpusError::Root {
        path: root.display().to_string(),
        source,
    };
    let meta = std::fs::metadata(root).map_err(root_err)?;
    if !meta.is_dir() {
        return Err(root_err(std::io::Error::new(
            std::io::ErrorKind::NotADirectory,
            "not a directory",
        )));
    }
    std::fs::read_dir(root).map_err(root_err)?;

    let mut report = Ingested::default();
    let mut candidates = Vec::new();
    for item in WalkDir::new(root).sort_by_file_name() {
        let item = match item {
            Ok(item) => item,
            Err(err) => {
                log::warn!("skipping unreadable entry: {err}");
                report.unreadable += 1;
                continue;
            }
        };
        if !item.file_type().is_file() {
            continue;
        }
        let name = item.file_name().to_string_lossy();
        let Some(extension) = extension_of(&name) else {
            report.skipped_no_extension += 1;
            continue;
        };
        let rel = item.path().strip_prefix(root).unwrap_or(item.path());
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        candidates.push((item.into_path(), rel, extension));
    }

    let loaded: Vec<Option<SourceFile>> = candidates
        .into_par_iter()
        .map(|(full, rel, extension)| match std::fs::read(&full) {
            Ok(content) => Some(SourceFile::new(rel, extension, content)),
            Err(err) => {
                log::warn!("skipping {}: {err}", full.display());
                None
            }
        })
        .collect();
    for file in loaded {
        match file {
            Some(f) => report.files.push(f),
            None => report.unreadable += 1,
        }
    }
    Ok(report)
}

/// Printable bytes: ASCII 0x20..=0x7E plus tab, LF and CR.
pub fn is_printable(byte: u8) -> bool {
    matches!(byte, 0x20..=0x7E | b'\t' | b'\n' | b'\r')
}

/// True when at most `max_nonprintable_ratio` of the bytes are non-printable.
/// Empty content is never textual.
pub fn is_textual(content: &[u8], max_nonprintable_ratio: f64) -> bool {
    if content.is_empty() {
        return false;
    }
    let bad = content.iter().filter(|&&b| !is_printable(b)).count();
    // bad / len <= ratio, without dividing
    (bad as f64) <= max_nonprintable_ratio * content.len() as f64
}

/// Drop extensions whose share of the files is below `min_freq` and label
/// the survivors.
pub fn filter_by_extension_frequency(
    files: Vec<SourceFile>,
    min_freq: f64,
) -> Result<(Vec<CorpusEntry>, LabelMap), CorpusError> {
    let total = files.len();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for f in &files {
        *counts.entry(f.extension.as_str()).or_default() += 1;
    }
    let kept: Vec<String> = counts
        .into_iter()
        .filter(|&(_, n)| (n as f64 / total as f64) >= min_freq)
        .map(|(ext, _)| ext.to_string())
        .collect();
    if kept.is_empty() {
        return Err(CorpusError::EmptyAfterFilter);
    }
    let labels = LabelMap::new(kept);
    let entries = files
        .into_iter()
        .filter_map(|f| {
            let label = labels.id(&f.extension)?;
            Some(CorpusEntry {
                content: f.content,
                label,
                extension: f.extension,
                path: f.path,
                content_digest: f.content_digest,
            })
        })
        .collect();
    Ok((entries, labels))
}

/// Deduplicate identical (content, extension) pairs, keeping the smallest
/// path, then remove every content that occurs under two or more extensions.
pub fn exclude_multi_extension(entries: Vec<CorpusEntry>) -> Vec<CorpusEntry> {
    let mut by_digest: BTreeMap<String, BTreeMap<String, CorpusEntry>> = BTreeMap::new();
    for entry in entries {
        let slot = by_digest.entry(entry.content_digest.clone()).or_default();
        match slot.get(&entry.extension) {
            Some(existing) if existing.path <= entry.path => {}
            _ => {
                slot.insert(entry.extension.clone(), entry);
            }
        }
    }
    by_digest
        .into_values()
        .filter(|exts| exts.len() == 1)
        .flat_map(BTreeMap::into_values)
        .collect()
}

/// Counters from [`clean`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleanStats {
    pub dropped_binary: usize,
    pub dropped_rare_extension: usize,
    pub dropped_multi_extension: usize,
}

/// Textuality filter followed by the frequency filter and multi-extension
/// exclusion, repeated until neither removes anything.
pub fn clean(
    files: Vec<SourceFile>,
    config: &CorpusConfig,
) -> Result<(Vec<CorpusEntry>, LabelMap, CleanStats), CorpusError> {
    let mut stats = CleanStats::default();
    let before = files.len();
    let mut files: Vec<SourceFile> = files
        .into_iter()
        .filter(|f| is_textual(&f.content, config.max_nonprintable_ratio))
        .collect();
    stats.dropped_binary = before - files.len();
    loop {
        let n = files.len();
        let (entries, labels) = filter_by_extension_frequency(files, config.min_ext_freq)?;
        stats.dropped_rare_extension += n - entries.len();
        let m = entries.len();
        let entries = exclude_multi_extension(entries);
        stats.dropped_multi_extension += m - entries.len();
        if entries.len() == n {
            return Ok((entries, labels, stats));
        }
        files = entries.into_iter().map(CorpusEntry::into_source).collect();
    }
}

/// Disjoint train / validation / test / vocabulary subsets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<CorpusEntry>,
    pub validation: Vec<CorpusEntry>,
    pub test: Vec<CorpusEntry>,
    pub vocab_subset: Vec<CorpusEntry>,
}

fn round_share(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction).round() as usize
}

/// Stratified holdout of validation and test, then undersampling of the rest
/// to the smallest class, then a per-class vocabulary subset carved out of
/// the balanced pool.
///
/// `labels` names classes in error messages.
pub fn split_and_balance(
    entries: Vec<CorpusEntry>,
    labels: &LabelMap,
    fractions: SplitFractions,
    vocab_fraction: f64,
    seed: u64,
) -> Result<CorpusSplit, CorpusError> {
    if !fractions.is_valid() {
        return Err(CorpusError::Fractions(fractions));
    }
    if !(0.0..=1.0).contains(&vocab_fraction) {
        return Err(CorpusError::VocabFraction(vocab_fraction));
    }
    let mut seen = BTreeSet::new();
    let mut by_class: BTreeMap<ClassId, Vec<CorpusEntry>> = BTreeMap::new();
    for e in entries {
        if !seen.insert(e.content_digest.clone()) {
            return Err(CorpusError::DuplicateDigest(e.content_digest));
        }
        by_class.entry(e.label).or_default().push(e);
    }

    let class_name = |id: ClassId| {
        labels
            .name(id)
            .map_or_else(|| id.to_string(), str::to_string)
    };
    let mut split = CorpusSplit::default();
    let mut pools = Vec::with_capacity(by_class.len());
    for (&label, members) in by_class.iter_mut() {
        let n = members.len();
        if n < 4 {
            return Err(CorpusError::ClassTooSmall {
                class: class_name(label),
                count: n,
            });
        }
        members.sort_by(|a, b| a.content_digest.cmp(&b.content_digest));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "split", &[label as u64]));
        members.shuffle(&mut rng);

        let n_val = round_share(n, fractions.validation);
        let n_test = round_share(n, fractions.test).min(n - n_val);
        let mut rest = std::mem::take(members);
        let tail = rest.split_off(n_val + n_test);
        split.test.extend(rest.drain(n_val..));
        split.validation.extend(rest);
        pools.push(tail);
    }

    let per_class = pools.iter().map(Vec::len).min().unwrap_or(0);
    if per_class == 0 {
        return Err(CorpusError::NoTrainingSamples);
    }
    let n_vocab = round_share(per_class, vocab_fraction).min(per_class);
    for mut pool in pools {
        pool.truncate(per_class);
        let train = pool.split_off(n_vocab);
        split.vocab_subset.extend(pool);
        split.train.extend(train);
    }
    for part in [
        &mut split.train,
        &mut split.validation,
        &mut split.test,
        &mut split.vocab_subset,
    ] {
        part.sort_by(|a, b| (a.label, &a.content_digest).cmp(&(b.label, &b.content_digest)));
    }
    Ok(split)
}

/// Entries grouped by class id, in class order.
pub fn group_by_class(entries: &[CorpusEntry]) -> BTreeMap<ClassId, Vec<&CorpusEntry>> {
    let mut groups: BTreeMap<ClassId, Vec<&CorpusEntry>> = BTreeMap::new();
    for e in entries {
        groups.entry(e.label).or_default().push(e);
    }
    groups
}
