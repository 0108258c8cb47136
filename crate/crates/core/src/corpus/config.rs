use std::fmt;
use std::path::Path;

use crate::config::{invalid, ConfigError, KeyValues};

/// Train / validation / test shares of each class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn is_valid(&self) -> bool {
        let parts = [self.train, self.validation, self.test];
        parts.iter().all(|&f| f > 0.0 && f.is_finite())
            && (parts.iter().sum::<f64>() - 1.0).abs() < 1e-9
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl fmt::Display for SplitFractions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?},{:?},{:?}", self.train, self.validation, self.test)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub min_ext_freq: f64,
    pub max_nonprintable_ratio: f64,
    pub fractions: SplitFractions,
    /// Share of the balanced per-class pool reserved for vocabulary building.
    pub vocab_fraction: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            min_ext_freq: 1e-4,
            max_nonprintable_ratio: 0.2,
            fractions: SplitFractions::default(),
            vocab_fraction: 0.25,
            seed: 0,
        }
    }
}

impl CorpusConfig {
    /// Read from `key = value` lines. Missing keys keep their defaults.
    ///
    /// Keys: `min_ext_freq`, `max_nonprintable_ratio`, `fractions`
    /// (`train,validation,test`), `vocab_fraction`, `seed`.
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self, ConfigError> {
        let mut config = CorpusConfig::default();
        if let Some(v) = kv.take("min_ext_freq")? {
            config.min_ext_freq = v;
        }
        if let Some(v) = kv.take("max_nonprintable_ratio")? {
            config.max_nonprintable_ratio = v;
        }
        if let Some(v) = kv.take_list::<f64>("fractions")? {
            let [train, validation, test] = v[..] else {
                return Err(invalid("fractions", format!("{v:?}")));
            };
            config.fractions = SplitFractions {
                train,
                validation,
                test,
            };
        }
        if let Some(v) = kv.take("vocab_fraction")? {
            config.vocab_fraction = v;
        }
        if let Some(v) = kv.take("seed")? {
            config.seed = v;
        }
        kv.finish()?;
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_key_values(KeyValues::parse(text)?)
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        Self::from_key_values(KeyValues::read(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.min_ext_freq) {
            return Err(invalid("min_ext_freq", self.min_ext_freq));
        }
        if !(0.0..=1.0).contains(&self.max_nonprintable_ratio) {
            return Err(invalid(
                "max_nonprintable_ratio",
                self.max_nonprintable_ratio,
            ));
        }
        if !self.fractions.is_valid() {
            return Err(invalid("fractions", self.fractions));
        }
        if !(0.0..1.0).contains(&self.vocab_fraction) {
            return Err(invalid("vocab_fraction", self.vocab_fraction));
        }
        Ok(())
    }

    /// Serialize in the same format [`CorpusConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        format!(
            "min_ext_freq = {:?}\nmax_nonprintable_ratio = {:?}\nfractions = {}\nvocab_fraction = {:?}\nseed = {}\n",
            self.min_ext_freq, self.max_nonprintable_ratio, self.fractions, self.vocab_fraction, self.seed
        )
    }
}
