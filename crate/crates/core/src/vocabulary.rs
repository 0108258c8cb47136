//! Token and bigram vocabularies built from per-class frequencies.
//!
//! A token enters the vocabulary when its frequency exceeds the threshold in
//! at least one class, so tokens that are common only within a few classes
//! survive. Bigrams are counted over the token stream after every
//! out-of-vocabulary token has been replaced by [`Gram::Unk`].
//!
//! Feature layout of the dimension `|V| + |V2| + 2`:
//!
//! | range                      | meaning        |
//! |----------------------------|----------------|
//! | `0..|V|`                   | tokens, sorted |
//! | `|V|`                      | UNK            |
//! | `|V|+1..|V|+1+|V2|`        | bigrams, sorted|
//! | `|V|+1+|V2|`               | UNK2           |

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::escape::{escape, unescape};
use crate::hashing::content_digest;
use crate::tokenizer::{tokenize_bytes, Trim};
use crate::ClassId;

const MAGIC: &str = "typeguess-vocab";
const VERSION: u32 = 1;
const UNK_FIELD: &str = "\\U";

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("no classes to build a vocabulary from")]
    NoClasses,
    #[error("class {0} has no tokens after trimming")]
    EmptyClass(ClassId),
    #[error("token vocabulary is empty at threshold {0}")]
    EmptyVocabulary(f64),
    #[error("threshold must lie in (0, 1), got {0}")]
    Threshold(f64),
    #[error("bigram component `{0}` is not in the token vocabulary")]
    UnknownComponent(String),
    #[error("vocabulary line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One side of a bigram: a vocabulary token or the unknown token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gram {
    Unk,
    Token(String),
}

impl fmt::Display for Gram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gram::Unk => f.write_str("<UNK>"),
            Gram::Token(t) => f.write_str(t),
        }
    }
}

pub type Bigram = (Gram, Gram);

/// Index of a token in V, `None` for UNK.
pub type Slot = Option<u32>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VocabConfig {
    pub token_threshold: f64,
    pub bigram_threshold: f64,
    pub trim: Trim,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            token_threshold: 1e-2,
            bigram_threshold: 1e-3,
            trim: Trim::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    bigrams: Vec<Bigram>,
    token_index: HashMap<String, usize>,
    bigram_index: HashMap<(Slot, Slot), usize>,
    settings: VocabConfig,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
            && self.bigrams == other.bigrams
            && self.settings == other.settings
    }
}

impl Vocabulary {
    /// Assemble from unordered token and bigram sets.
    pub fn new(
        tokens: impl IntoIterator<Item = String>,
        bigrams: impl IntoIterator<Item = Bigram>,
        settings: VocabConfig,
    ) -> Result<Self, VocabError> {
        let tokens: Vec<String> = tokens
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let token_index: HashMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let bigrams: Vec<Bigram> = bigrams
            .into_iter()
            .filter(|b| *b != (Gram::Unk, Gram::Unk))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let slot_of = |g: &Gram| -> Result<Slot, VocabError> {
            match g {
                Gram::Unk => Ok(None),
                Gram::Token(t) => token_index
                    .get(t)
                    .map(|&i| Some(i as u32))
                    .ok_or_else(|| VocabError::UnknownComponent(t.clone())),
            }
        };
        let mut bigram_index = HashMap::with_capacity(bigrams.len());
        for (k, (a, b)) in bigrams.iter().enumerate() {
            bigram_index.insert((slot_of(a)?, slot_of(b)?), k);
        }
        Ok(Vocabulary {
            tokens,
            bigrams,
            token_index,
            bigram_index,
            settings,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn bigrams(&self) -> &[Bigram] {
        &self.bigrams
    }

    pub fn settings(&self) -> &VocabConfig {
        &self.settings
    }

    pub fn unk_index(&self) -> usize {
        self.tokens.len()
    }

    pub fn unk2_index(&self) -> usize {
        self.tokens.len() + 1 + self.bigrams.len()
    }

    pub fn dimension(&self) -> usize {
        self.tokens.len() + self.bigrams.len() + 2
    }

    /// Feature index of a token; out-of-vocabulary tokens map to UNK.
    pub fn token_feature(&self, token: &str) -> usize {
        self.token_index
            .get(token)
            .copied()
            .unwrap_or(self.unk_index())
    }

    pub fn slot(&self, token: &str) -> Slot {
        self.token_index.get(token).map(|&i| i as u32)
    }

    /// Replace every token by its slot.
    pub fn substitute<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<Slot> {
        tokens.iter().map(|t| self.slot(t.as_ref())).collect()
    }

    /// Feature index of an adjacent pair; pairs outside V2 map to UNK2.
    pub fn bigram_feature(&self, first: Slot, second: Slot) -> usize {
        match self.bigram_index.get(&(first, second)) {
            Some(&k) => self.tokens.len() + 1 + k,
            None => self.unk2_index(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.settings;
        let _ = writeln!(out, "{MAGIC} {VERSION}");
        let _ = writeln!(out, "tokens\t{}", self.tokens.len());
        let _ = writeln!(out, "bigrams\t{}", self.bigrams.len());
        let _ = writeln!(out, "token_threshold\t{:?}", s.token_threshold);
        let _ = writeln!(out, "bigram_threshold\t{:?}", s.bigram_threshold);
        let _ = writeln!(out, "trim\t{}\t{}", s.trim.head, s.trim.tail);
        for t in &self.tokens {
            let _ = writeln!(out, "{}", escape(t));
        }
        let field = |g: &Gram| match g {
            Gram::Unk => UNK_FIELD.to_string(),
            Gram::Token(t) => escape(t),
        };
        for (a, b) in &self.bigrams {
            let _ = writeln!(out, "{}\t{}", field(a), field(b));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, VocabError> {
        let lines: Vec<&str> = text.lines().collect();
        let err = |line: usize, reason: &str| VocabError::Parse {
            line: line + 1,
            reason: reason.into(),
        };
        let header = |i: usize, key: &str| -> Result<&str, VocabError> {
            lines
                .get(i)
                .and_then(|l| l.strip_prefix(key))
                .and_then(|l| l.strip_prefix('\t'))
                .ok_or_else(|| err(i, &format!("expected `{key}`")))
        };
        if lines.first().copied() != Some(&format!("{MAGIC} {VERSION}")) {
            return Err(err(0, "not a version 1 vocabulary"));
        }
        let n_tokens: usize = header(1, "tokens")?
            .parse()
            .map_err(|_| err(1, "bad count"))?;
        let n_bigrams: usize = header(2, "bigrams")?
            .parse()
            .map_err(|_| err(2, "bad count"))?;
        let token_threshold = header(3, "token_threshold")?
            .parse()
            .map_err(|_| err(3, "bad threshold"))?;
        let bigram_threshold = header(4, "bigram_threshold")?
            .parse()
            .map_err(|_| err(4, "bad threshold"))?;
        let (head, tail) = header(5, "trim")?
            .split_once('\t')
            .ok_or_else(|| err(5, "bad trim"))?;
        let trim = Trim::new(
            head.parse().map_err(|_| err(5, "bad trim"))?,
            tail.parse().map_err(|_| err(5, "bad trim"))?,
        );
        if lines.len() != 6 + n_tokens + n_bigrams {
            return Err(err(lines.len(), "line count does not match header"));
        }
        let mut tokens = Vec::with_capacity(n_tokens);
        for (i, line) in lines.iter().enumerate().skip(6).take(n_tokens) {
            let t = unescape(line)
                .filter(|t| !t.is_empty())
                .ok_or_else(|| err(i, "bad token"))?;
            tokens.push(t);
        }
        let gram = |i: usize, f: &str| -> Result<Gram, VocabError> {
            if f == UNK_FIELD {
                Ok(Gram::Unk)
            } else {
                unescape(f)
                    .filter(|t| !t.is_empty())
                    .map(Gram::Token)
                    .ok_or_else(|| err(i, "bad bigram"))
            }
        };
        let mut bigrams = Vec::with_capacity(n_bigrams);
        for (i, line) in lines.iter().enumerate().skip(6 + n_tokens) {
            let (a, b) = line.split_once('\t').ok_or_else(|| err(i, "bad bigram"))?;
            bigrams.push((gram(i, a)?, gram(i, b)?));
        }
        let vocab = Vocabulary::new(
            tokens,
            bigrams,
            VocabConfig {
                token_threshold,
                bigram_threshold,
                trim,
            },
        )?;
        if vocab.tokens.len() != n_tokens || vocab.bigrams.len() != n_bigrams {
            return Err(err(0, "duplicate entries"));
        }
        Ok(vocab)
    }

    pub fn digest(&self) -> String {
        content_digest(self.to_text().as_bytes())
    }

    pub fn write(&self, path: &Path) -> Result<(), VocabError> {
        std::fs::write(path, self.to_text()).map_err(|source| VocabError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, VocabError> {
        let text = std::fs::read_to_string(path).map_err(|source| VocabError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

/// Files of each class, as raw bytes.
pub type ClassFiles<'a> = BTreeMap<ClassId, Vec<&'a [u8]>>;

fn trimmed_streams(files: &[&[u8]], trim: Trim) -> Vec<Vec<String>> {
    files
        .par_iter()
        .map(|bytes| trim.window(&tokenize_bytes(bytes).tokens).to_vec())
        .collect()
}

fn frequencies<K: Ord + Clone>(counts: BTreeMap<K, u64>, total: u64) -> BTreeMap<K, f64> {
    counts
        .into_iter()
        .map(|(k, n)| (k, n as f64 / total as f64))
        .collect()
}

fn token_freqs_of(streams: &[Vec<String>]) -> Option<BTreeMap<String, f64>> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for t in streams.iter().flatten() {
        *counts.entry(t.clone()).or_default() += 1;
        total += 1;
    }
    (total > 0).then(|| frequencies(counts, total))
}

/// Pooled token frequencies per class: occurrences over total tokens of the
/// class, after trimming each file.
pub fn class_token_frequencies(
    classes: &ClassFiles<'_>,
    trim: Trim,
) -> Result<BTreeMap<ClassId, BTreeMap<String, f64>>, VocabError> {
    if classes.is_empty() {
        return Err(VocabError::NoClasses);
    }
    classes
        .iter()
        .map(|(&class, files)| {
            let streams = trimmed_streams(files, trim);
            token_freqs_of(&streams)
                .map(|f| (class, f))
                .ok_or(VocabError::EmptyClass(class))
        })
        .collect()
}

fn check_threshold(t: f64) -> Result<(), VocabError> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(VocabError::Threshold(t))
    }
}

/// Tokens whose frequency exceeds `threshold` in at least one class, sorted.
pub fn build_token_vocab(
    freqs: &BTreeMap<ClassId, BTreeMap<String, f64>>,
    threshold: f64,
) -> Result<Vec<String>, VocabError> {
    check_threshold(threshold)?;
    let tokens: BTreeSet<&String> = freqs
        .values()
        .flat_map(|f| f.iter().filter(|&(_, &p)| p > threshold).map(|(t, _)| t))
        .collect();
    if tokens.is_empty() {
        return Err(VocabError::EmptyVocabulary(threshold));
    }
    Ok(tokens.into_iter().cloned().collect())
}

fn bigram_vocab_of(
    per_class: &[Vec<Vec<String>>],
    tokens: &[String],
    threshold: f64,
) -> Vec<Bigram> {
    let index: HashMap<&str, u32> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i as u32))
        .collect();
    let mut selected: BTreeSet<(Slot, Slot)> = BTreeSet::new();
    for streams in per_class {
        let mut counts: BTreeMap<(Slot, Slot), u64> = BTreeMap::new();
        let mut total = 0u64;
        for stream in streams {
            let slots: Vec<Slot> = stream
                .iter()
                .map(|t| index.get(t.as_str()).copied())
                .collect();
            for pair in slots.windows(2) {
                *counts.entry((pair[0], pair[1])).or_default() += 1;
                total += 1;
            }
        }
        if total == 0 {
            continue;
        }
        selected.extend(
            frequencies(counts, total)
                .into_iter()
                .filter(|&(pair, p)| p > threshold && pair != (None, None))
                .map(|(pair, _)| pair),
        );
    }
    let gram = |s: Slot| s.map_or(Gram::Unk, |i| Gram::Token(tokens[i as usize].clone()));
    // slot order agrees with Gram order because `tokens` is sorted and Unk sorts first
    selected
        .into_iter()
        .map(|(a, b)| (gram(a), gram(b)))
        .collect()
}

/// Bigrams of the UNK-substituted stream whose frequency exceeds `threshold`
/// in at least one class, sorted. `(UNK, UNK)` is never included.
pub fn build_bigram_vocab(
    classes: &ClassFiles<'_>,
    tokens: &[String],
    threshold: f64,
    trim: Trim,
) -> Result<Vec<Bigram>, VocabError> {
    check_threshold(threshold)?;
    if tokens.is_empty() {
        return Err(VocabError::EmptyVocabulary(threshold));
    }
    let mut sorted = tokens.to_vec();
    sorted.sort();
    sorted.dedup();
    let per_class: Vec<_> = classes
        .values()
        .map(|files| trimmed_streams(files, trim))
        .collect();
    Ok(bigram_vocab_of(&per_class, &sorted, threshold))
}

/// Token vocabulary, bigram vocabulary and feature layout in one pass.
pub fn build_vocabulary(
    classes: &ClassFiles<'_>,
    config: VocabConfig,
) -> Result<Vocabulary, VocabError> {
    check_threshold(config.token_threshold)?;
    check_threshold(config.bigram_threshold)?;
    if classes.is_empty() {
        return Err(VocabError::NoClasses);
    }
    let per_class: Vec<Vec<Vec<String>>> = classes
        .values()
        .map(|files| trimmed_streams(files, config.trim))
        .collect();
    let mut freqs = BTreeMap::new();
    for (&class, streams) in classes.keys().zip(&per_class) {
        freqs.insert(
            class,
            token_freqs_of(streams).ok_or(VocabError::EmptyClass(class))?,
        );
    }
    let tokens = build_token_vocab(&freqs, config.token_threshold)?;
    let bigrams = bigram_vocab_of(&per_class, &tokens, config.bigram_threshold);
    Vocabulary::new(tokens, bigrams, config)
}
