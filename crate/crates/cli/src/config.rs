//! Config file and flag resolution: flags > config file > defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use x2static::corpus::PreprocessConfig;
use x2static::TrainerConfig;

use crate::args::TrainerFlags;
use crate::error::CliError;

pub const DEFAULT_MIN_COUNT: u64 = 10;
pub const DEFAULT_MAX_SIZE: usize = 750_000;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub trainer: TrainerConfig,
    pub vocab: VocabSection,
    pub preprocess: PreprocessSection,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSection {
    pub min_count: Option<u64>,
    pub max_size: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub min_sentences: Option<usize>,
    pub min_chars: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path).map_err(CliError::at(path))?;
        toml::from_str(&text).map_err(CliError::at(path))
    }

    pub fn trainer(&self, flags: &TrainerFlags) -> TrainerConfig {
        let mut c = self.trainer.clone();
        if let Some(v) = flags.epochs {
            c.epochs = v;
        }
        if let Some(v) = flags.negatives {
            c.negatives = v;
        }
        if let Some(v) = flags.subsample_t {
            c.subsample_t = v;
        }
        if let Some(v) = flags.lr {
            c.learning_rate = v;
        }
        if let Some(v) = flags.batch {
            c.batch_size = v;
        }
        if let Some(v) = flags.seed {
            c.seed = v;
        }
        if flags.dim.is_some() {
            c.dim = flags.dim;
        }
        if let Some(v) = flags.threads {
            c.threads = v;
        }
        c
    }

    pub fn vocab(&self, min_count: Option<u64>, max_size: Option<usize>) -> (u64, usize) {
        (
            min_count.or(self.vocab.min_count).unwrap_or(DEFAULT_MIN_COUNT),
            max_size.or(self.vocab.max_size).unwrap_or(DEFAULT_MAX_SIZE),
        )
    }

    pub fn preprocess(&self, min_sentences: Option<usize>, min_chars: Option<usize>) -> PreprocessConfig {
        let d = PreprocessConfig::default();
        PreprocessConfig {
            min_sentences: min_sentences.or(self.preprocess.min_sentences).unwrap_or(d.min_sentences),
            min_chars: min_chars.or(self.preprocess.min_chars).unwrap_or(d.min_chars),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_file_overrides_defaults() {
        let file: ConfigFile = toml::from_str("[trainer]\nepochs = 4\nnegatives = 3\n[vocab]\nmin_count = 2\n").unwrap();
        let flags = TrainerFlags {
            epochs: Some(7),
            ..TrainerFlags::default()
        };
        let c = file.trainer(&flags);
        assert_eq!(c.epochs, 7);
        assert_eq!(c.negatives, 3);
        assert_eq!(c.batch_size, 128);
        assert_eq!(file.vocab(None, None), (2, DEFAULT_MAX_SIZE));
        assert_eq!(file.vocab(Some(5), Some(9)), (5, 9));
        assert_eq!(file.preprocess(None, Some(10)).min_sentences, 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ConfigFile>("[trainer]\nepoch = 4\n").is_err());
        assert!(toml::from_str::<ConfigFile>("[training]\n").is_err());
    }
}
