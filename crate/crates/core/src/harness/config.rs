//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every key can be
//! overridden by an environment variable named `SPGRAPH_` + the upper-cased
//! key (e.g. `SPGRAPH_EPOCHS=300`). Lists are comma-separated.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::SplitRatios;
use crate::embedding::EmbeddingConfig;
use crate::issuegraph::InputMode;
use crate::model::{HgtConfig, ModelKind, Task};
use crate::textnorm::TextNormConfig;

pub const ENV_PREFIX: &str = "SPGRAPH_";

/// Which issues' text the embedding model is trained on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingCorpus {
    #[default]
    Train,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: HgtConfig,
    pub model_kind: ModelKind,
    pub embedding: EmbeddingConfig,
    pub embedding_corpus: EmbeddingCorpus,
    pub textnorm: TextNormConfig,
    pub input_mode: InputMode,
    pub ratios: SplitRatios,
    /// Hold out the last 10% of the source project as Valid in cross runs.
    pub cross_valid_tail: bool,
    pub repeats: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: HgtConfig::default(),
            model_kind: ModelKind::Hgt,
            embedding: EmbeddingConfig::default(),
            embedding_corpus: EmbeddingCorpus::Train,
            textnorm: TextNormConfig::default(),
            input_mode: InputMode::Full,
            ratios: SplitRatios::default(),
            cross_valid_tail: false,
            repeats: 10,
        }
    }
}

pub const KEYS: &[&str] = &[
    "attention_heads",
    "epochs",
    "conv_layers",
    "hidden_channels",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "seed",
    "task",
    "model",
    "input_mode",
    "upward_only",
    "select_best_valid",
    "embedding_dim",
    "embedding_window",
    "embedding_negatives",
    "embedding_epochs",
    "embedding_min_n",
    "embedding_max_n",
    "embedding_buckets",
    "embedding_learning_rate",
    "embedding_corpus",
    "train_ratio",
    "valid_ratio",
    "test_ratio",
    "cross_valid_tail",
    "repeats",
    "special_tags",
    "delimiter_tags",
    "sentence_delimiters",
    "newline_delimits",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value.parse().map_err(|_| HarnessError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl RunConfig {
    /// Sets one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let v = value.trim();
        let bad = || HarnessError::BadValue {
            key: key.to_string(),
            value: v.to_string(),
        };
        match key {
            "attention_heads" => self.model.heads = parse(key, v)?,
            "epochs" => self.model.epochs = parse(key, v)?,
            "conv_layers" => self.model.layers = parse(key, v)?,
            "hidden_channels" => self.model.hidden = parse(key, v)?,
            "learning_rate" => self.model.learning_rate = parse(key, v)?,
            "adam_beta1" => self.model.beta1 = parse(key, v)?,
            "adam_beta2" => self.model.beta2 = parse(key, v)?,
            "adam_eps" => self.model.eps = parse(key, v)?,
            "seed" => {
                self.model.seed = parse(key, v)?;
                self.embedding.seed = self.model.seed;
            }
            "task" => {
                self.model.task = match v.to_ascii_lowercase().as_str() {
                    "regression" => Task::Regression,
                    "classification" => Task::Classification,
                    _ => return Err(bad()),
                }
            }
            "model" => {
                self.model_kind = match v.to_ascii_lowercase().as_str() {
                    "hgt" => ModelKind::Hgt,
                    "gcn" => ModelKind::Gcn,
                    _ => return Err(bad()),
                }
            }
            "input_mode" => {
                self.input_mode = match v.to_ascii_lowercase().as_str() {
                    "full" => InputMode::Full,
                    "title-only" | "title_only" => InputMode::TitleOnly,
                    "description-only" | "description_only" | "desc-only" => {
                        InputMode::DescriptionOnly
                    }
                    _ => return Err(bad()),
                }
            }
            "upward_only" => self.model.upward_only = parse(key, v)?,
            "select_best_valid" => self.model.select_best_valid = parse(key, v)?,
            "embedding_dim" => {
                self.embedding.dim = parse(key, v)?;
                self.model.input_dim = self.embedding.dim;
            }
            "embedding_window" => self.embedding.window = parse(key, v)?,
            "embedding_negatives" => self.embedding.negatives = parse(key, v)?,
            "embedding_epochs" => self.embedding.epochs = parse(key, v)?,
            "embedding_min_n" => self.embedding.min_n = parse(key, v)?,
            "embedding_max_n" => self.embedding.max_n = parse(key, v)?,
            "embedding_buckets" => self.embedding.bucket_count = parse(key, v)?,
            "embedding_learning_rate" => self.embedding.learning_rate = parse(key, v)?,
            "embedding_corpus" => {
                self.embedding_corpus = match v.to_ascii_lowercase().as_str() {
                    "train" => EmbeddingCorpus::Train,
                    "all" => EmbeddingCorpus::All,
                    _ => return Err(bad()),
                }
            }
            "train_ratio" => self.ratios.train = parse(key, v)?,
            "valid_ratio" => self.ratios.valid = parse(key, v)?,
            "test_ratio" => self.ratios.test = parse(key, v)?,
            "cross_valid_tail" => self.cross_valid_tail = parse(key, v)?,
            "repeats" => self.repeats = parse(key, v)?,
            "special_tags" => self.textnorm.special_tags = list(v),
            "delimiter_tags" => self.textnorm.delimiter_tags = list(v),
            "sentence_delimiters" => {
                self.textnorm.sentence_delimiters = list(v)
                    .iter()
                    .map(|s| {
                        let mut c = s.chars();
                        match (c.next(), c.next()) {
                            (Some(ch), None) => Ok(ch),
                            _ => Err(bad()),
                        }
                    })
                    .collect::<Result<_, _>>()?
            }
            "newline_delimits" => self.textnorm.newline_delimits = parse(key, v)?,
            _ => return Err(HarnessError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn apply_str(&mut self, text: &str) -> Result<(), HarnessError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Config {
                line: i + 1,
                message: "expected key = value".into(),
            })?;
            self.set(k.trim(), v).map_err(|e| HarnessError::Config {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        self.apply_str(&std::fs::read_to_string(path)?)
    }

    /// Applies `SPGRAPH_<KEY>` overrides from `vars` (normally `std::env::vars()`).
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(
        &mut self,
        vars: I,
    ) -> Result<(), HarnessError> {
        let mut found: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| {
                let key = k.strip_prefix(ENV_PREFIX)?.to_ascii_lowercase();
                KEYS.contains(&key.as_str()).then_some((key, v))
            })
            .collect();
        // Keys are applied in table order so overlapping keys resolve the same way every time.
        found.sort_by_key(|(k, _)| KEYS.iter().position(|x| x == k));
        for (k, v) in found {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Renders every key in file syntax.
    pub fn to_kv_string(&self) -> String {
        self.to_kv()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Every key with its effective value, in table order.
    pub fn to_kv(&self) -> Vec<(&'static str, String)> {
        let m = &self.model;
        let e = &self.embedding;
        let t = &self.textnorm;
        let lower = |s: String| s.to_ascii_lowercase();
        let mode = match self.input_mode {
            InputMode::Full => "full",
            InputMode::TitleOnly => "title-only",
            InputMode::DescriptionOnly => "description-only",
        };
        vec![
            ("attention_heads", m.heads.to_string()),
            ("epochs", m.epochs.to_string()),
            ("conv_layers", m.layers.to_string()),
            ("hidden_channels", m.hidden.to_string()),
            ("learning_rate", m.learning_rate.to_string()),
            ("adam_beta1", m.beta1.to_string()),
            ("adam_beta2", m.beta2.to_string()),
            ("adam_eps", m.eps.to_string()),
            ("seed", m.seed.to_string()),
            ("task", lower(format!("{:?}", m.task))),
            ("model", lower(format!("{:?}", self.model_kind))),
            ("input_mode", mode.to_string()),
            ("upward_only", m.upward_only.to_string()),
            ("select_best_valid", m.select_best_valid.to_string()),
            ("embedding_dim", e.dim.to_string()),
            ("embedding_window", e.window.to_string()),
            ("embedding_negatives", e.negatives.to_string()),
            ("embedding_epochs", e.epochs.to_string()),
            ("embedding_min_n", e.min_n.to_string()),
            ("embedding_max_n", e.max_n.to_string()),
            ("embedding_buckets", e.bucket_count.to_string()),
            ("embedding_learning_rate", e.learning_rate.to_string()),
            (
                "embedding_corpus",
                lower(format!("{:?}", self.embedding_corpus)),
            ),
            ("train_ratio", self.ratios.train.to_string()),
            ("valid_ratio", self.ratios.valid.to_string()),
            ("test_ratio", self.ratios.test.to_string()),
            ("cross_valid_tail", self.cross_valid_tail.to_string()),
            ("repeats", self.repeats.to_string()),
            ("special_tags", t.special_tags.join(",")),
            ("delimiter_tags", t.delimiter_tags.join(",")),
            (
                "sentence_delimiters",
                t.sentence_delimiters
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("newline_delimits", t.newline_delimits.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_names_and_comments() {
        let mut c = RunConfig::default();
        c.apply_str("# paper defaults\nattention_heads = 4\nepochs=300 # shorter\nconv_layers = 2\nhidden_channels = 128\n")
            .unwrap();
        assert_eq!(c.model.epochs, 300);
        assert_eq!(c.model.heads, 4);
        assert!(matches!(
            c.apply_str("nope = 1"),
            Err(HarnessError::Config { line: 1, .. })
        ));
        assert!(c.apply_str("epochs").is_err());
    }

    #[test]
    fn env_overrides_and_round_trip() {
        let mut c = RunConfig::default();
        c.apply_env([
            ("SPGRAPH_EPOCHS".to_string(), "7".to_string()),
            ("SPGRAPH_TASK".to_string(), "classification".to_string()),
            ("SPGRAPH_DATASET_DIR".to_string(), "/x".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ])
        .unwrap();
        assert_eq!(c.model.epochs, 7);
        assert_eq!(c.model.task, Task::Classification);

        let mut back = RunConfig::default();
        back.apply_str(&c.to_kv_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn embedding_dim_sets_model_input() {
        let mut c = RunConfig::default();
        c.set("embedding_dim", "32").unwrap();
        assert_eq!(c.model.input_dim, 32);
    }
}
