//! Tab-separated corpus manifest.
//!
//! ```text
//! typeguess-corpus 1
//! root<TAB><corpus root>
//! classes<TAB><n>
//! <extension of class 0>
//! ...
//! entries<TAB><m>
//! <split><TAB><digest><TAB><extension><TAB><label><TAB><bytes><TAB><relative path>
//! ```
//!
//! Paths are escaped with [`crate::escape`]. Contents are not stored; they
//! are re-read from the root and checked against their digest.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use super::{CorpusEntry, CorpusSplit, LabelMap};
use crate::escape::{escape, unescape};
use crate::hashing::content_digest;
use crate::ClassId;

const MAGIC: &str = "typeguess-corpus";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unsupported manifest version {0}")]
    Version(String),
    #[error("{path} changed since the manifest was written")]
    Stale { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitKind {
    Train,
    Validation,
    Test,
    Vocab,
}

impl SplitKind {
    pub const ALL: [SplitKind; 4] = [
        SplitKind::Train,
        SplitKind::Validation,
        SplitKind::Test,
        SplitKind::Vocab,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Validation => "validation",
            SplitKind::Test => "test",
            SplitKind::Vocab => "vocab",
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SplitKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown split `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub split: SplitKind,
    pub digest: String,
    pub extension: String,
    pub label: ClassId,
    pub size: u64,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub root: String,
    pub labels: LabelMap,
    pub records: Vec<ManifestRecord>,
}

impl CorpusManifest {
    pub fn from_split(root: impl Into<String>, labels: LabelMap, split: &CorpusSplit) -> Self {
        let parts = [
            (SplitKind::Train, &split.train),
            (SplitKind::Validation, &split.validation),
            (SplitKind::Test, &split.test),
            (SplitKind::Vocab, &split.vocab_subset),
        ];
        let records = parts
            .into_iter()
            .flat_map(|(kind, entries)| {
                entries.iter().map(move |e| ManifestRecord {
                    split: kind,
                    digest: e.content_digest.clone(),
                    extension: e.extension.clone(),
                    label: e.label,
                    size: e.content.len() as u64,
                    path: e.path.clone(),
                })
            })
            .collect();
        CorpusManifest {
            root: root.into(),
            labels,
            records,
        }
    }

    pub fn records(&self, split: SplitKind) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {VERSION}");
        let _ = writeln!(out, "root\t{}", escape(&self.root));
        let _ = writeln!(out, "classes\t{}", self.labels.len());
        for c in self.labels.classes() {
            let _ = writeln!(out, "{}", escape(c));
        }
        let _ = writeln!(out, "entries\t{}", self.records.len());
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.split,
                r.digest,
                escape(&r.extension),
                r.label,
                r.size,
                escape(&r.path)
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| ManifestError::Parse {
                line: 0,
                reason: format!("truncated before {what}"),
            })
        };
        let err = |line: usize, reason: &str| ManifestError::Parse {
            line,
            reason: reason.into(),
        };

        let (_, header) = next("header")?;
        match header.split_once(' ') {
            Some((MAGIC, v)) if v == VERSION.to_string() => {}
            Some((MAGIC, v)) => return Err(ManifestError::Version(v.to_string())),
            _ => return Err(err(1, "not a corpus manifest")),
        }

        let (n, line) = next("root")?;
        let root = line
            .strip_prefix("root\t")
            .and_then(unescape)
            .ok_or_else(|| err(n, "expected root"))?;

        let (n, line) = next("classes")?;
        let count: usize = line
            .strip_prefix("classes\t")
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| err(n, "expected class count"))?;
        let mut classes = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = next("class")?;
            classes.push(unescape(line).ok_or_else(|| err(n, "bad class name"))?);
        }
        let labels = LabelMap::new(classes.iter().cloned());
        if labels.classes() != classes.as_slice() {
            return Err(err(n, "classes must be unique and sorted"));
        }

        let (n, line) = next("entries")?;
        let count: usize = line
            .strip_prefix("entries\t")
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| err(n, "expected entry count"))?;
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = next("entry")?;
            let fields: Vec<&str> = line.split('\t').collect();
            let [split, digest, extension, label, size, path] = fields[..] else {
                return Err(err(n, "expected 6 fields"));
            };
            let record = ManifestRecord {
                split: split.parse().map_err(|e: String| err(n, &e))?,
                digest: digest.to_string(),
                extension: unescape(extension).ok_or_else(|| err(n, "bad extension"))?,
                label: label.parse().map_err(|_| err(n, "bad label"))?,
                size: size.parse().map_err(|_| err(n, "bad size"))?,
                path: unescape(path).ok_or_else(|| err(n, "bad path"))?,
            };
            if labels.name(record.label) != Some(record.extension.as_str()) {
                return Err(err(n, "label does not match extension"));
            }
            records.push(record);
        }
        if let Some((n, _)) = lines.next() {
            return Err(err(n, "trailing content"));
        }
        Ok(CorpusManifest {
            root,
            labels,
            records,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        std::fs::write(path, self.to_text()).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Digest of the serialized manifest.
    pub fn digest(&self) -> String {
        content_digest(self.to_text().as_bytes())
    }

    fn file_path(&self, record: &ManifestRecord) -> PathBuf {
        record
            .path
            .split('/')
            .fold(PathBuf::from(&self.root), |p, part| p.join(part))
    }

    /// Re-read one split from disk.
    pub fn load(&self, split: SplitKind) -> Result<Vec<CorpusEntry>, ManifestError> {
        self.records(split)
            .map(|r| {
                let full = self.file_path(r);
                let content = std::fs::read(&full).map_err(|source| ManifestError::Io {
                    path: full.display().to_string(),
                    source,
                })?;
                if content.len() as u64 != r.size || content_digest(&content) != r.digest {
                    return Err(ManifestError::Stale {
                        path: full.display().to_string(),
                    });
                }
                Ok(CorpusEntry {
                    content,
                    label: r.label,
                    extension: r.extension.clone(),
                    path: r.path.clone(),
                    content_digest: r.digest.clone(),
                })
            })
            .collect()
    }

    pub fn load_split(&self) -> Result<CorpusSplit, ManifestError> {
        Ok(CorpusSplit {
            train: self.load(SplitKind::Train)?,
            validation: self.load(SplitKind::Validation)?,
            test: self.load(SplitKind::Test)?,
            vocab_subset: self.load(SplitKind::Vocab)?,
        })
    }
}
