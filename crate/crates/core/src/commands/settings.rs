use std::path::Path;

use crate::config::{invalid, ConfigError, KeyValues};
use crate::network::{Activation, TrainConfig};
use crate::tokenizer::Trim;
use crate::vocabulary::VocabConfig;

/// Everything `train` reads from its config file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub train: TrainConfig,
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub activation: Activation,
    pub vocab: VocabConfig,
    /// Trim affixes when featurizing the training split.
    pub trim_training_features: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            train: TrainConfig::default(),
            hidden: vec![1000, 800, 700],
            dropout_rate: 0.5,
            activation: Activation::Relu,
            vocab: VocabConfig::default(),
            trim_training_features: true,
        }
    }
}

macro_rules! take_into {
    ($kv:ident, $($key:literal => $field:expr),+ $(,)?) => {
        $(if let Some(v) = $kv.take($key)? { $field = v; })+
    };
}

impl TrainSettings {
    /// Missing keys keep their defaults.
    ///
    /// Keys: `learning_rate`, `epochs`, `batch_size`, `seed`, `adam_beta1`,
    /// `adam_beta2`, `adam_epsilon`, `hidden` (comma-separated widths),
    /// `dropout_rate`, `activation` (`relu` or `tanh`), `token_threshold`,
    /// `bigram_threshold`, `trim_head`, `trim_tail`, `trim_training_features`.
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self, ConfigError> {
        let mut s = TrainSettings::default();
        take_into!(kv,
            "learning_rate" => s.train.learning_rate,
            "epochs" => s.train.epochs,
            "batch_size" => s.train.batch_size,
            "seed" => s.train.seed,
            "adam_beta1" => s.train.adam_beta1,
            "adam_beta2" => s.train.adam_beta2,
            "adam_epsilon" => s.train.adam_epsilon,
            "dropout_rate" => s.dropout_rate,
            "activation" => s.activation,
            "token_threshold" => s.vocab.token_threshold,
            "bigram_threshold" => s.vocab.bigram_threshold,
            "trim_head" => s.vocab.trim.head,
            "trim_tail" => s.vocab.trim.tail,
            "trim_training_features" => s.trim_training_features,
        );
        if let Some(hidden) = kv.take_list("hidden")? {
            s.hidden = hidden;
        }
        kv.finish()?;
        s.validate()?;
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_key_values(KeyValues::parse(text)?)
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        Self::from_key_values(KeyValues::read(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.train;
        if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", t.learning_rate));
        }
        if t.epochs == 0 {
            return Err(invalid("epochs", 0));
        }
        if t.batch_size == 0 {
            return Err(invalid("batch_size", 0));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(invalid("dropout_rate", self.dropout_rate));
        }
        if self.hidden.contains(&0) {
            return Err(invalid("hidden", format!("{:?}", self.hidden)));
        }
        for (key, v) in [
            ("token_threshold", self.vocab.token_threshold),
            ("bigram_threshold", self.vocab.bigram_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(key, v));
            }
        }
        Ok(())
    }

    pub fn trim(&self) -> Trim {
        self.vocab.trim
    }

    /// Serialize in the format [`TrainSettings::parse`] reads.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let hidden: Vec<String> = self.hidden.iter().map(usize::to_string).collect();
        format!(
            "learning_rate = {:?}\nepochs = {}\nbatch_size = {}\nseed = {}\n\
             adam_beta1 = {:?}\nadam_beta2 = {:?}\nadam_epsilon = {:?}\n\
             hidden = {}\ndropout_rate = {:?}\nactivation = {}\n\
             token_threshold = {:?}\nbigram_threshold = {:?}\n\
             trim_head = {}\ntrim_tail = {}\ntrim_training_features = {}\n",
            t.learning_rate,
            t.epochs,
            t.batch_size,
            t.seed,
            t.adam_beta1,
            t.adam_beta2,
            t.adam_epsilon,
            hidden.join(","),
            self.dropout_rate,
            self.activation,
            self.vocab.token_threshold,
            self.vocab.bigram_threshold,
            self.vocab.trim.head,
            self.vocab.trim.tail,
            self.trim_training_features,
        )
    }
}
