use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingConfig, EmbeddingError, EmbeddingModel};

const NEG_TABLE_SIZE: usize = 1_000_000;

fn sigmoid(x: f32) -> f32 {
    if x > 8.0 {
        1.0
    } else if x < -8.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f32], a: f32, x: &[f32]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Vocabulary ordered by descending count, ties broken by token.
fn vocabulary(sentences: &[Vec<String>]) -> (Vec<String>, Vec<u64>) {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for t in sentences.iter().flatten() {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut v: Vec<(&str, u64)> = counts.into_iter().collect();
    v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    v.into_iter().map(|(w, c)| (w.to_string(), c)).unzip()
}

/// Unigram table with counts raised to 0.75.
fn negative_table(counts: &[u64]) -> Vec<u32> {
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let z: f64 = weights.iter().sum();
    let mut table = Vec::with_capacity(NEG_TABLE_SIZE + counts.len());
    for (i, w) in weights.iter().enumerate() {
        let n = ((w / z) * NEG_TABLE_SIZE as f64).ceil() as usize;
        table.extend(std::iter::repeat_n(i as u32, n));
    }
    table
}

/// Trains CBOW with negative sampling.
///
/// The context vector is the mean, over window positions, of each context
/// token's representation (own vector plus mean n-gram vector). Iteration
/// order is the sentence order given, so results depend only on the input
/// and `cfg.seed`. Single-token sentences carry no context and are skipped.
pub fn train_cbow(
    sentences: &[Vec<String>],
    cfg: &EmbeddingConfig,
) -> Result<EmbeddingModel, EmbeddingError> {
    cfg.validate()?;
    if !sentences.iter().any(|s| s.len() >= 2) {
        return Err(EmbeddingError::EmptyCorpus);
    }
    let dim = cfg.dim;
    let (vocab, counts) = vocabulary(sentences);
    let model = EmbeddingModel::from_parts(cfg.clone(), vocab, Vec::new(), Vec::new());
    let buckets: Vec<Vec<u32>> = model.vocab.iter().map(|w| model.buckets(w)).collect();
    let ids: Vec<Vec<u32>> = sentences
        .iter()
        .filter(|s| s.len() >= 2)
        .map(|s| {
            s.iter()
                .map(|t| model.vocab_index(t).unwrap() as u32)
                .collect()
        })
        .collect();
    let neg = negative_table(&counts);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 1.0 / dim as f32;
    let mut words: Vec<f32> = (0..model.vocab.len() * dim)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    let mut ngrams: Vec<f32> = (0..cfg.bucket_count * dim)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    let mut output = vec![0f32; model.vocab.len() * dim];

    let total = (cfg.epochs * ids.iter().map(Vec::len).sum::<usize>()).max(1) as f64;
    let mut processed = 0usize;
    let mut hidden = vec![0f32; dim];
    let mut grad = vec![0f32; dim];
    let mut ctx: Vec<u32> = Vec::with_capacity(2 * cfg.window);
    for _ in 0..cfg.epochs {
        for sent in &ids {
            for pos in 0..sent.len() {
                let lr = (cfg.learning_rate * (1.0 - processed as f64 / total)) as f32;
                processed += 1;
                let radius = rng.gen_range(1..=cfg.window);
                ctx.clear();
                let lo = pos.saturating_sub(radius);
                let hi = (pos + radius).min(sent.len() - 1);
                ctx.extend((lo..=hi).filter(|&c| c != pos).map(|c| sent[c]));
                if ctx.is_empty() {
                    continue;
                }

                hidden.fill(0.0);
                let inv_ctx = 1.0 / ctx.len() as f32;
                for &c in &ctx {
                    let c = c as usize;
                    axpy(&mut hidden, inv_ctx, &words[c * dim..(c + 1) * dim]);
                    let inv_g = inv_ctx / buckets[c].len() as f32;
                    for &b in &buckets[c] {
                        let b = b as usize;
                        axpy(&mut hidden, inv_g, &ngrams[b * dim..(b + 1) * dim]);
                    }
                }

                grad.fill(0.0);
                let target = sent[pos];
                for k in 0..=cfg.negatives {
                    let (id, label) = if k == 0 {
                        (target, 1.0)
                    } else {
                        let id = neg[rng.gen_range(0..neg.len())];
                        if id == target {
                            continue;
                        }
                        (id, 0.0)
                    };
                    let row = &mut output[id as usize * dim..(id as usize + 1) * dim];
                    let g = lr * (label - sigmoid(dot(row, &hidden)));
                    axpy(&mut grad, g, row);
                    axpy(row, g, &hidden);
                }

                for &c in &ctx {
                    let c = c as usize;
                    axpy(&mut words[c * dim..(c + 1) * dim], 1.0, &grad);
                    let inv_g = 1.0 / buckets[c].len() as f32;
                    for &b in &buckets[c] {
                        let b = b as usize;
                        axpy(&mut ngrams[b * dim..(b + 1) * dim], inv_g, &grad);
                    }
                }
            }
        }
    }
    log::debug!(
        "cbow: {} words, {} tokens/epoch",
        model.vocab.len(),
        total as usize / cfg.epochs.max(1)
    );
    Ok(EmbeddingModel::from_parts(
        cfg.clone(),
        model.vocab,
        words,
        ngrams,
    ))
}
