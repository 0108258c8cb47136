//! Record of one command invocation, written next to its output artifact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::escape::{escape, unescape};

const MAGIC: &str = "typeguess-run 1";

/// Config snapshot, digests of the artifacts involved, timestamps and
/// per-stage counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunManifest {
    pub command: String,
    pub config: String,
    pub seed: u64,
    pub corpus_digest: Option<String>,
    pub vocab_digest: Option<String>,
    pub model_digest: Option<String>,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: u64,
    pub counters: BTreeMap<String, u64>,
}

pub fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// `<artifact>.run`
pub fn path_for(artifact: &Path) -> PathBuf {
    let mut name = artifact.as_os_str().to_os_string();
    name.push(".run");
    PathBuf::from(name)
}

impl RunManifest {
    pub fn new(command: &str, config: String, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            config,
            seed,
            started: now(),
            ..Self::default()
        }
    }

    pub fn count(&mut self, key: &str, value: usize) {
        self.counters.insert(key.to_string(), value as u64);
    }

    pub fn to_text(&self) -> String {
        let opt = |d: &Option<String>| d.clone().unwrap_or_else(|| "-".into());
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "command\t{}", self.command);
        let _ = writeln!(out, "seed\t{}", self.seed);
        let _ = writeln!(out, "corpus_digest\t{}", opt(&self.corpus_digest));
        let _ = writeln!(out, "vocab_digest\t{}", opt(&self.vocab_digest));
        let _ = writeln!(out, "model_digest\t{}", opt(&self.model_digest));
        let _ = writeln!(out, "started\t{}", self.started);
        let _ = writeln!(out, "finished\t{}", self.finished);
        let _ = writeln!(out, "config\t{}", escape(&self.config));
        for (k, v) in &self.counters {
            let _ = writeln!(out, "counter\t{k}\t{v}");
        }
        out
    }

    pub fn parse(text: &str) -> Option<Self> {
        let mut lines = text.lines();
        if lines.next()? != MAGIC {
            return None;
        }
        let mut m = RunManifest::default();
        let opt = |v: &str| (v != "-").then(|| v.to_string());
        for line in lines {
            let (key, rest) = line.split_once('\t')?;
            match key {
                "command" => m.command = rest.to_string(),
                "seed" => m.seed = rest.parse().ok()?,
                "corpus_digest" => m.corpus_digest = opt(rest),
                "vocab_digest" => m.vocab_digest = opt(rest),
                "model_digest" => m.model_digest = opt(rest),
                "started" => m.started = rest.parse().ok()?,
                "finished" => m.finished = rest.parse().ok()?,
                "config" => m.config = unescape(rest)?,
                "counter" => {
                    let (k, v) = rest.split_once('\t')?;
                    m.counters.insert(k.to_string(), v.parse().ok()?);
                }
                _ => return None,
            }
        }
        Some(m)
    }

    /// Stamp the finish time and write to `<artifact>.run`.
    pub fn finish(mut self, artifact: &Path) -> std::io::Result<Self> {
        self.finished = now();
        std::fs::write(path_for(artifact), self.to_text())?;
        Ok(self)
    }
}
