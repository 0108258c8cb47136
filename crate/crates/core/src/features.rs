//! Dense token/bigram frequency vectors.

use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::CorpusEntry;
use crate::tokenizer::{tokenize_bytes, Trim};
use crate::vocabulary::Vocabulary;
use crate::ClassId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("unfeaturizable input: no tokens")]
    Unfeaturizable,
}

/// Frequencies over the feature layout of a [`Vocabulary`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Option<ClassId>,
}

impl FeatureVector {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    /// `(index, value)` of every non-zero entry, in index order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, v)| v != 0.0)
    }
}

/// Frequency vector of an already tokenized stream.
pub fn featurize_tokens<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
) -> Result<FeatureVector, FeatureError> {
    if tokens.is_empty() {
        return Err(FeatureError::Unfeaturizable);
    }
    let mut counts = vec![0u64; vocab.dimension()];
    let slots = vocab.substitute(tokens);
    for t in tokens {
        counts[vocab.token_feature(t.as_ref())] += 1;
    }
    for pair in slots.windows(2) {
        counts[vocab.bigram_feature(pair[0], pair[1])] += 1;
    }
    let n_tokens = tokens.len() as f64;
    let n_bigrams = (tokens.len() - 1) as f64;
    let split = vocab.unk_index() + 1;
    let values = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if c == 0 {
                0.0
            } else if i < split {
                c as f64 / n_tokens
            } else {
                c as f64 / n_bigrams
            }
        })
        .collect();
    Ok(FeatureVector {
        values,
        label: None,
    })
}

/// Frequency vector of a file's content over the whole token stream.
pub fn featurize(content: &[u8], vocab: &Vocabulary) -> Result<FeatureVector, FeatureError> {
    featurize_tokens(&tokenize_bytes(content).tokens, vocab)
}

/// Like [`featurize`] but on the trimmed token stream.
pub fn featurize_trimmed(
    content: &[u8],
    vocab: &Vocabulary,
    trim: Trim,
) -> Result<FeatureVector, FeatureError> {
    let tokens = tokenize_bytes(content).tokens;
    featurize_tokens(trim.window(&tokens), vocab)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureBatch {
    pub vectors: Vec<FeatureVector>,
    pub dropped: usize,
}

/// Featurize entries in order, dropping those without tokens.
pub fn featurize_batch(entries: &[CorpusEntry], vocab: &Vocabulary, trim: Trim) -> FeatureBatch {
    let results: Vec<_> = entries
        .par_iter()
        .map(|e| {
            featurize_trimmed(&e.content, vocab, trim).map(|mut v| {
                v.label = Some(e.label);
                v
            })
        })
        .collect();
    let mut batch = FeatureBatch::default();
    for r in results {
        match r {
            Ok(v) => batch.vectors.push(v),
            Err(_) => batch.dropped += 1,
        }
    }
    batch
}

/// Sparse text dump: a `dimension count` header, then one line per vector
/// with the label (`-` when absent) and space-separated `index:value` pairs.
pub fn write_dump<W: Write>(out: &mut W, vectors: &[FeatureVector]) -> io::Result<()> {
    let dimension = vectors.first().map_or(0, FeatureVector::dimension);
    writeln!(out, "{dimension} {}", vectors.len())?;
    for v in vectors {
        match v.label {
            Some(l) => write!(out, "{l}")?,
            None => write!(out, "-")?,
        }
        for (i, x) in v.nonzeros() {
            write!(out, " {i}:{x:?}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_dump<R: BufRead>(input: R) -> io::Result<Vec<FeatureVector>> {
    let bad = |what: &str| io::Error::new(io::ErrorKind::InvalidData, what.to_string());
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| bad("missing header"))??;
    let (dim, count) = header.split_once(' ').ok_or_else(|| bad("bad header"))?;
    let dim: usize = dim.parse().map_err(|_| bad("bad dimension"))?;
    let count: usize = count.parse().map_err(|_| bad("bad count"))?;
    let mut out = Vec::with_capacity(count);
    for line in lines {
        let line = line?;
        let mut fields = line.split(' ');
        let label = match fields.next() {
            Some("-") => None,
            Some(l) => Some(l.parse().map_err(|_| bad("bad label"))?),
            None => return Err(bad("empty line")),
        };
        let mut values = vec![0.0; dim];
        for pair in fields {
            let (i, x) = pair.split_once(':').ok_or_else(|| bad("bad pair"))?;
            let i: usize = i.parse().map_err(|_| bad("bad index"))?;
            *values.get_mut(i).ok_or_else(|| bad("index out of range"))? =
                x.parse().map_err(|_| bad("bad value"))?;
        }
        out.push(FeatureVector { values, label });
    }
    if out.len() != count {
        return Err(bad("count mismatch"));
    }
    Ok(out)
}
