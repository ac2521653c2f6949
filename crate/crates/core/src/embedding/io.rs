//! Embedding checkpoint (`SPEM`, version 1).
//!
//! Layout after the header: config block (dim, window, negatives, epochs,
//! min_n, max_n, bucket_count as `u32`; learning rate `f64`; seed `u64`),
//! vocabulary strings, word matrix and n-gram matrix (`f32` blocks).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbeddingConfig, EmbeddingError, EmbeddingModel};
use crate::binio::{self, FormatError};

const MAGIC: &[u8; 4] = b"SPEM";
const VERSION: u32 = 1;

pub fn write_model<W: Write>(w: &mut W, m: &EmbeddingModel) -> Result<(), FormatError> {
    let c = &m.config;
    binio::write_header(w, MAGIC, VERSION)?;
    for v in [
        c.dim,
        c.window,
        c.negatives,
        c.epochs,
        c.min_n,
        c.max_n,
        c.bucket_count,
    ] {
        binio::write_u32(w, v as u32)?;
    }
    binio::write_f64(w, c.learning_rate)?;
    binio::write_u64(w, c.seed)?;
    binio::write_strs(w, &m.vocab)?;
    binio::write_f32s(w, &m.word_vectors)?;
    binio::write_f32s(w, &m.ngram_vectors)?;
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<EmbeddingModel, EmbeddingError> {
    binio::read_header(r, MAGIC, "embedding", VERSION)?;
    let mut u = [0usize; 7];
    for x in &mut u {
        *x = binio::read_u32(r)? as usize;
    }
    let [dim, window, negatives, epochs, min_n, max_n, bucket_count] = u;
    let config = EmbeddingConfig {
        dim,
        window,
        negatives,
        epochs,
        min_n,
        max_n,
        bucket_count,
        learning_rate: binio::read_f64(r)?,
        seed: binio::read_u64(r)?,
    };
    config.validate()?;
    let vocab = binio::read_strs(r)?;
    let words = binio::read_f32s(r)?;
    let ngrams = binio::read_f32s(r)?;
    if words.len() != vocab.len() * dim {
        return Err(EmbeddingError::DimMismatch {
            expected: dim,
            found: words.len() / vocab.len().max(1),
        });
    }
    if ngrams.len() != bucket_count * dim {
        return Err(EmbeddingError::BucketMismatch {
            expected: bucket_count,
            found: ngrams.len() / dim,
        });
    }
    Ok(EmbeddingModel::from_parts(config, vocab, words, ngrams))
}

pub fn save_model(path: impl AsRef<Path>, m: &EmbeddingModel) -> Result<(), EmbeddingError> {
    let mut w = BufWriter::new(File::create(path).map_err(FormatError::Io)?);
    write_model(&mut w, m)?;
    w.flush().map_err(FormatError::Io)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EmbeddingModel, EmbeddingError> {
    let mut r = BufReader::new(File::open(path).map_err(FormatError::Io)?);
    read_model(&mut r)
}
