//! CBOW embeddings with hashed character n-grams, and initial node features.
//!
//! A token is represented by its own vector plus the mean of its n-gram
//! bucket vectors, so unseen tokens still get a vector from their n-grams.

mod io;
mod train;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::issuegraph::{HeteroGraph, NodeType};

pub use io::{load_model, read_model, save_model, write_model};
pub use train::train_cbow;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("no sentence with at least two tokens to train on")]
    EmptyCorpus,
    #[error("invalid embedding config: {0}")]
    BadConfig(String),
    #[error("embedding dim {found} does not match expected {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("bucket count {found} does not match expected {expected}")]
    BucketMismatch { expected: usize, found: usize },
    #[error("non-finite feature in {node_type} row {row}")]
    NonFinite { node_type: &'static str, row: usize },
    #[error(transparent)]
    Format(#[from] crate::binio::FormatError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dim: usize,
    /// Maximum context radius; each position samples a radius in `1..=window`.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub bucket_count: usize,
    /// Initial step size, decayed linearly to zero over training.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_n: 3,
            max_n: 6,
            bucket_count: 100_000,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let bad = |m: &str| Err(EmbeddingError::BadConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.min_n == 0 || self.min_n > self.max_n {
            return bad("need 0 < min_n <= max_n");
        }
        if self.bucket_count == 0 || self.bucket_count > u32::MAX as usize {
            return bad("bucket_count must be in 1..=u32::MAX");
        }
        if self.window == 0 {
            return bad("window must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

/// 32-bit FNV-1a over the UTF-8 bytes.
pub fn fnv1a(s: &str) -> u32 {
    s.bytes().fold(2_166_136_261u32, |h, b| {
        (h ^ b as u32).wrapping_mul(16_777_619)
    })
}

/// Character n-grams of `<token>` with lengths `min_n..=max_n`.
pub fn char_ngrams(token: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let chars: Vec<char> = format!("<{token}>").chars().collect();
    let mut out = Vec::new();
    for i in 0..chars.len() {
        for n in min_n..=max_n {
            if i + n > chars.len() {
                break;
            }
            out.push(chars[i..i + n].iter().collect());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub config: EmbeddingConfig,
    pub vocab: Vec<String>,
    index: HashMap<String, u32>,
    /// `vocab.len() × dim`, row-major.
    pub word_vectors: Vec<f32>,
    /// `bucket_count × dim`, row-major.
    pub ngram_vectors: Vec<f32>,
}

impl EmbeddingModel {
    pub(crate) fn from_parts(
        config: EmbeddingConfig,
        vocab: Vec<String>,
        word_vectors: Vec<f32>,
        ngram_vectors: Vec<f32>,
    ) -> Self {
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Self {
            config,
            vocab,
            index,
            word_vectors,
            ngram_vectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn vocab_index(&self, token: &str) -> Option<usize> {
        self.index.get(token).map(|&i| i as usize)
    }

    pub fn buckets(&self, token: &str) -> Vec<u32> {
        let b = self.config.bucket_count as u32;
        char_ngrams(token, self.config.min_n, self.config.max_n)
            .iter()
            .map(|g| fnv1a(g) % b)
            .collect()
    }

    fn word_row(&self, i: usize) -> &[f32] {
        &self.word_vectors[i * self.dim()..(i + 1) * self.dim()]
    }

    fn ngram_row(&self, b: u32) -> &[f32] {
        let b = b as usize;
        &self.ngram_vectors[b * self.dim()..(b + 1) * self.dim()]
    }

    /// Own vector (when in vocabulary) plus the mean of the n-gram vectors.
    pub fn word_vector(&self, token: &str) -> Vec<f32> {
        let mut v = vec![0f32; self.dim()];
        let buckets = self.buckets(token);
        if !buckets.is_empty() {
            let scale = 1.0 / buckets.len() as f32;
            for &b in &buckets {
                for (x, y) in v.iter_mut().zip(self.ngram_row(b)) {
                    *x += y * scale;
                }
            }
        }
        if let Some(i) = self.vocab_index(token) {
            for (x, y) in v.iter_mut().zip(self.word_row(i)) {
                *x += y;
            }
        }
        v
    }

    /// Arithmetic mean of [`word_vector`](Self::word_vector); zero for no tokens.
    pub fn sequence_vector<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f32> {
        mean_of(
            self.dim(),
            tokens.iter().map(|t| self.word_vector(t.as_ref())),
        )
    }
}

fn mean_of(dim: usize, rows: impl Iterator<Item = Vec<f32>>) -> Vec<f32> {
    let mut acc = vec![0f64; dim];
    let mut n = 0usize;
    for r in rows {
        for (a, x) in acc.iter_mut().zip(&r) {
            *a += *x as f64;
        }
        n += 1;
    }
    if n == 0 {
        return vec![0.0; dim];
    }
    acc.iter().map(|a| (*a / n as f64) as f32).collect()
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Dense `rows × dim` feature matrix for one node type.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl FeatureTable {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Initial features for every node, indexed by [`NodeType::index`].
///
/// Terminal nodes take the vector of their token; internal nodes the mean
/// over the tokens they cover.
pub fn init_node_embeddings(
    h: &HeteroGraph,
    m: &EmbeddingModel,
    input_dim: usize,
) -> Result<Vec<FeatureTable>, EmbeddingError> {
    if m.dim() != input_dim {
        return Err(EmbeddingError::DimMismatch {
            expected: input_dim,
            found: m.dim(),
        });
    }
    let words = &h.table(NodeType::Word).keys;
    let codes = &h.table(NodeType::CodeToken).keys;
    let mut distinct: Vec<&str> = words.iter().chain(codes).map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let vectors = crate::par::map(&distinct, |t| m.word_vector(t));
    let cache: HashMap<&str, &Vec<f32>> = distinct.iter().copied().zip(&vectors).collect();
    let lookup = |t: &str| -> Vec<f32> {
        match cache.get(t) {
            Some(v) => (*v).clone(),
            None => m.word_vector(t),
        }
    };

    let mut out = Vec::with_capacity(NodeType::COUNT);
    for t in NodeType::ALL {
        let table = h.table(t);
        let rows: Vec<Vec<f32>> = if t.is_terminal() {
            crate::par::map(&table.keys, |k| lookup(k))
        } else {
            crate::par::map(&table.tokens, |toks| {
                mean_of(input_dim, toks.iter().map(|x| lookup(x)))
            })
        };
        let data: Vec<f32> = rows.into_iter().flatten().collect();
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite {
                node_type: t.name(),
                row: pos / input_dim,
            });
        }
        out.push(FeatureTable {
            rows: table.len(),
            dim: input_dim,
            data,
        });
    }
    Ok(out)
}
