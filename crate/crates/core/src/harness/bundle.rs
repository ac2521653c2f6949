//! Single-file prediction bundle: run configuration, trained model and
//! embedding model.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::config::RunConfig;
use super::HarnessError;
use crate::binio::{read_header, read_str, write_header, write_str, FormatError};
use crate::embedding::EmbeddingModel;
use crate::error::Result;
use crate::model::TrainedModel;

const MAGIC: &[u8; 4] = b"SPBD";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub config: RunConfig,
    pub model: TrainedModel,
    pub embedding: EmbeddingModel,
}

pub fn write_bundle<W: Write>(w: &mut W, b: &Bundle) -> Result<()> {
    write_header(w, MAGIC, VERSION)?;
    write_str(
        w,
        &serde_json::to_string(&b.config).map_err(HarnessError::from)?,
    )?;
    crate::model::write_model(w, &b.model)?;
    crate::embedding::write_model(w, &b.embedding)?;
    Ok(())
}

pub fn read_bundle<R: Read>(r: &mut R) -> Result<Bundle> {
    read_header(r, MAGIC, "bundle", VERSION)?;
    let config = serde_json::from_str(&read_str(r)?).map_err(HarnessError::from)?;
    let model = crate::model::read_model(r)?;
    let embedding = crate::embedding::read_model(r)?;
    Ok(Bundle {
        config,
        model,
        embedding,
    })
}

pub fn save_bundle(path: impl AsRef<Path>, b: &Bundle) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_bundle(&mut w, b)?;
    w.flush().map_err(FormatError::from)?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<Bundle> {
    read_bundle(&mut BufReader::new(File::open(path)?))
}
