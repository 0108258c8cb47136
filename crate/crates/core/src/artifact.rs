//! Versioned binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"TGMODEL\0"  u32 version
//! u64 length, UTF-8 header (architecture, training config, vocab digest, classes)
//! u64 length, UTF-8 vocabulary file
//! per layer: u64 fan_in, u64 fan_out, fan_in*fan_out f64 weights (row-major), fan_out f64 biases
//! 32-byte SHA-256 of everything above
//! ```

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::LabelMap;
use crate::escape::{escape, unescape};
use crate::hashing::content_digest;
use crate::network::{
    predict_unchecked, Architecture, Layer, ModelParameters, NetworkError, PredictError,
    Prediction, TrainConfig,
};
use crate::vocabulary::{VocabError, Vocabulary};
use crate::Scalar;

const MAGIC: &[u8; 8] = b"TGMODEL\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("not a model file")]
    Magic,
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("model checksum mismatch")]
    Checksum,
    #[error("truncated model file")]
    Truncated,
    #[error("bad model header: {0}")]
    Header(String),
    #[error("model vocabulary: {0}")]
    Vocabulary(#[from] VocabError),
    #[error("model parameters: {0}")]
    Network(#[from] NetworkError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Parameters, the vocabulary they were trained against, and the training
/// configuration used.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub params: ModelParameters<T>,
    pub vocabulary: Vocabulary,
    pub train_config: TrainConfig,
}

impl<T: Scalar> Model<T> {
    /// Bind `params` to `vocabulary`.
    pub fn new(
        params: ModelParameters<T>,
        vocabulary: Vocabulary,
        train_config: TrainConfig,
    ) -> Result<Self, ArtifactError> {
        let model = Model {
            params: ModelParameters {
                vocab_digest: vocabulary.digest(),
                ..params
            },
            vocabulary,
            train_config,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<(), ArtifactError> {
        self.params.check()?;
        if self.vocabulary.dimension() != self.params.input_dim() {
            return Err(ArtifactError::Header(format!(
                "vocabulary dimension {} != input dimension {}",
                self.vocabulary.dimension(),
                self.params.input_dim()
            )));
        }
        if self.params.label_map.len() != self.params.output_dim() {
            return Err(ArtifactError::Header(
                "class count != output dimension".into(),
            ));
        }
        if self.vocabulary.digest() != self.params.vocab_digest {
            return Err(ArtifactError::Header("vocabulary digest mismatch".into()));
        }
        Ok(())
    }

    pub fn labels(&self) -> &LabelMap {
        &self.params.label_map
    }

    pub fn predict(&self, content: &[u8]) -> Result<Prediction<T>, PredictError> {
        predict_unchecked(&self.params, content, &self.vocabulary)
    }

    fn header(&self) -> String {
        let a = &self.params.architecture;
        let c = &self.train_config;
        let hidden: Vec<String> = a.hidden.iter().map(usize::to_string).collect();
        let mut h = String::new();
        let _ = writeln!(h, "input_dim\t{}", a.input_dim);
        let _ = writeln!(h, "hidden\t{}", hidden.join(","));
        let _ = writeln!(h, "output_dim\t{}", a.output_dim);
        let _ = writeln!(h, "dropout_rate\t{:?}", a.dropout_rate);
        let _ = writeln!(h, "activation\t{}", a.activation);
        let _ = writeln!(h, "learning_rate\t{:?}", c.learning_rate);
        let _ = writeln!(h, "epochs\t{}", c.epochs);
        let _ = writeln!(h, "batch_size\t{}", c.batch_size);
        let _ = writeln!(h, "seed\t{}", c.seed);
        let _ = writeln!(h, "adam_beta1\t{:?}", c.adam_beta1);
        let _ = writeln!(h, "adam_beta2\t{:?}", c.adam_beta2);
        let _ = writeln!(h, "adam_epsilon\t{:?}", c.adam_epsilon);
        let _ = writeln!(h, "vocab_digest\t{}", self.params.vocab_digest);
        let _ = writeln!(h, "classes\t{}", self.params.label_map.len());
        for class in self.params.label_map.classes() {
            let _ = writeln!(h, "class\t{}", escape(class));
        }
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for block in [self.header(), self.vocabulary.to_text()] {
            out.extend_from_slice(&(block.len() as u64).to_le_bytes());
            out.extend_from_slice(block.as_bytes());
        }
        for layer in &self.params.layers {
            out.extend_from_slice(&(layer.fan_in as u64).to_le_bytes());
            out.extend_from_slice(&(layer.fan_out as u64).to_le_bytes());
            for v in layer.weights.iter().chain(&layer.bias) {
                out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
            }
        }
        let checksum = Sha256::digest(&out);
        out.extend_from_slice(&checksum);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArtifactError> {
        if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(ArtifactError::Magic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(ArtifactError::Version(version));
        }
        if bytes.len() < 12 + 32 {
            return Err(ArtifactError::Truncated);
        }
        let (body, checksum) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != checksum {
            return Err(ArtifactError::Checksum);
        }
        let mut reader = Reader {
            bytes: body,
            pos: 12,
        };
        let header = reader.text()?;
        let vocabulary = Vocabulary::parse(&reader.text()?)?;
        let (architecture, train_config, vocab_digest, label_map) = parse_header(&header)?;
        let widths = architecture.widths();
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let fan_in = reader.u64()? as usize;
            let fan_out = reader.u64()? as usize;
            if (fan_in, fan_out) != (w[0], w[1]) {
                return Err(ArtifactError::Header(
                    "layer shape does not match architecture".into(),
                ));
            }
            let weights = reader.reals::<T>(
                fan_in
                    .checked_mul(fan_out)
                    .ok_or(ArtifactError::Truncated)?,
            )?;
            let bias = reader.reals::<T>(fan_out)?;
            layers.push(Layer {
                fan_in,
                fan_out,
                weights,
                bias,
            });
        }
        if reader.pos != body.len() {
            return Err(ArtifactError::Header("trailing bytes".into()));
        }
        let model = Model {
            params: ModelParameters {
                layers,
                architecture,
                vocab_digest,
                label_map,
            },
            vocabulary,
            train_config,
        };
        model.check()?;
        Ok(model)
    }

    /// Digest of the serialized artifact.
    pub fn digest(&self) -> String {
        content_digest(&self.to_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| ArtifactError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ArtifactError> {
        let bytes = std::fs::read(path).map_err(|source| ArtifactError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ArtifactError> {
        let end = self.pos.checked_add(n).ok_or(ArtifactError::Truncated)?;
        let out = self
            .bytes
            .get(self.pos..end)
            .ok_or(ArtifactError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64, ArtifactError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn text(&mut self) -> Result<String, ArtifactError> {
        let n = self.u64()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| ArtifactError::Header("invalid UTF-8".into()))
    }

    fn reals<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>, ArtifactError> {
        let raw = self.take(n.checked_mul(8).ok_or(ArtifactError::Truncated)?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect())
    }
}

fn parse_header(
    text: &str,
) -> Result<(Architecture, TrainConfig, String, LabelMap), ArtifactError> {
    let mut lines = text.lines();
    let mut field = |key: &str| -> Result<String, ArtifactError> {
        lines
            .next()
            .and_then(|l| l.strip_prefix(key))
            .and_then(|l| l.strip_prefix('\t'))
            .map(str::to_string)
            .ok_or_else(|| ArtifactError::Header(format!("expected `{key}`")))
    };
    fn num<V: std::str::FromStr>(key: &str, v: String) -> Result<V, ArtifactError> {
        v.parse()
            .map_err(|_| ArtifactError::Header(format!("bad `{key}`: {v}")))
    }
    let input_dim = num("input_dim", field("input_dim")?)?;
    let hidden_text = field("hidden")?;
    let hidden = if hidden_text.is_empty() {
        Vec::new()
    } else {
        hidden_text
            .split(',')
            .map(|w| num("hidden", w.to_string()))
            .collect::<Result<_, _>>()?
    };
    let output_dim = num("output_dim", field("output_dim")?)?;
    let dropout_rate = num("dropout_rate", field("dropout_rate")?)?;
    let activation = field("activation")?
        .parse()
        .map_err(ArtifactError::Header)?;
    let architecture = Architecture {
        input_dim,
        hidden,
        output_dim,
        dropout_rate,
        activation,
    };
    let train_config = TrainConfig {
        learning_rate: num("learning_rate", field("learning_rate")?)?,
        epochs: num("epochs", field("epochs")?)?,
        batch_size: num("batch_size", field("batch_size")?)?,
        seed: num("seed", field("seed")?)?,
        adam_beta1: num("adam_beta1", field("adam_beta1")?)?,
        adam_beta2: num("adam_beta2", field("adam_beta2")?)?,
        adam_epsilon: num("adam_epsilon", field("adam_epsilon")?)?,
    };
    let vocab_digest = field("vocab_digest")?;
    let count: usize = num("classes", field("classes")?)?;
    let mut classes = Vec::with_capacity(count);
    for _ in 0..count {
        let raw = field("class")?;
        classes.push(unescape(&raw).ok_or_else(|| ArtifactError::Header("bad class".into()))?);
    }
    if lines.next().is_some() {
        return Err(ArtifactError::Header("trailing header lines".into()));
    }
    let label_map = LabelMap::new(classes.iter().cloned());
    if label_map.classes() != classes.as_slice() {
        return Err(ArtifactError::Header(
            "classes must be unique and sorted".into(),
        ));
    }
    architecture.validate()?;
    Ok((architecture, train_config, vocab_digest, label_map))
}
