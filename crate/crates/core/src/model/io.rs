//! Parameter checkpoint (`SPMP`, version 1).
//!
//! Layout after the header: kind and task (`u32`), the config block
//! (layers, heads, hidden, input_dim, epochs, upward_only, select_best_valid
//! as `u32`; learning rate, beta1, beta2, eps as `f64`; seed `u64`), class
//! values (`f64` block, empty for regression), relation indices (`u32`
//! block), then `u32` tensor count and per tensor: name, rows, cols, values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::Parameters;
use super::{
    ClassMap, GcnParams, HgtConfig, HgtParams, HgtShape, ModelError, ModelKind, ModelParams, Task,
    TrainedModel,
};
use crate::binio::{self, FormatError};
use crate::issuegraph::RelationType;

const MAGIC: &[u8; 4] = b"SPMP";
const VERSION: u32 = 1;

pub fn write_model<W: Write>(w: &mut W, m: &TrainedModel) -> Result<(), FormatError> {
    binio::write_header(w, MAGIC, VERSION)?;
    let c = &m.config;
    binio::write_u32(w, m.kind as u32)?;
    binio::write_u32(w, c.task as u32)?;
    for v in [
        c.layers,
        c.heads,
        c.hidden,
        c.input_dim,
        c.epochs,
        c.upward_only as usize,
        c.select_best_valid as usize,
    ] {
        binio::write_u32(w, v as u32)?;
    }
    for v in [c.learning_rate, c.beta1, c.beta2, c.eps] {
        binio::write_f64(w, v)?;
    }
    binio::write_u64(w, c.seed)?;
    binio::write_f64s(w, m.class_map.as_ref().map_or(&[][..], |cm| &cm.classes))?;
    let rels: Vec<u32> = match &m.params {
        ModelParams::Hgt(p) => p.relations.iter().map(|r| r.index() as u32).collect(),
        ModelParams::Gcn(_) => Vec::new(),
    };
    binio::write_u32s(w, &rels)?;
    let names = m.params.names();
    let tensors = m.params.tensors();
    binio::write_u32(w, tensors.len() as u32)?;
    for (name, t) in names.iter().zip(tensors) {
        binio::write_str(w, name)?;
        binio::write_u32(w, t.rows as u32)?;
        binio::write_u32(w, t.cols as u32)?;
        binio::write_f64s(w, &t.data)?;
    }
    Ok(())
}

fn corrupt(m: impl Into<String>) -> ModelError {
    ModelError::Format(FormatError::Corrupt(m.into()))
}

pub fn read_model<R: Read>(r: &mut R) -> Result<TrainedModel, ModelError> {
    binio::read_header(r, MAGIC, "model", VERSION)?;
    let kind = match binio::read_u32(r)? {
        0 => ModelKind::Hgt,
        1 => ModelKind::Gcn,
        k => return Err(corrupt(format!("model kind {k}"))),
    };
    let task = match binio::read_u32(r)? {
        0 => Task::Regression,
        1 => Task::Classification,
        t => return Err(corrupt(format!("task {t}"))),
    };
    let mut u = [0usize; 7];
    for x in &mut u {
        *x = binio::read_u32(r)? as usize;
    }
    let [layers, heads, hidden, input_dim, epochs, upward_only, select_best_valid] = u;
    let mut f = [0f64; 4];
    for x in &mut f {
        *x = binio::read_f64(r)?;
    }
    let config = HgtConfig {
        layers,
        heads,
        hidden,
        epochs,
        task,
        learning_rate: f[0],
        beta1: f[1],
        beta2: f[2],
        eps: f[3],
        seed: binio::read_u64(r)?,
        input_dim,
        upward_only: upward_only != 0,
        select_best_valid: select_best_valid != 0,
    };
    config.validate()?;
    let classes = binio::read_f64s(r)?;
    let class_map = match task {
        Task::Regression => None,
        Task::Classification => Some(ClassMap { classes }),
    };
    let outputs = class_map.as_ref().map_or(1, ClassMap::len);
    let rels = binio::read_u32s(r)?
        .into_iter()
        .map(|i| {
            (i < RelationType::COUNT as u32)
                .then(|| RelationType::from_index(i as usize))
                .ok_or_else(|| corrupt(format!("relation {i}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = match kind {
        ModelKind::Hgt => {
            let shape = HgtShape {
                input_dim,
                hidden,
                heads,
                layers,
                outputs,
            };
            ModelParams::Hgt(HgtParams::init(shape, &rels, &mut rng))
        }
        ModelKind::Gcn => ModelParams::Gcn(GcnParams::init(
            input_dim, hidden, layers, outputs, &mut rng,
        )),
    };
    let names = params.names();
    let n = binio::read_u32(r)? as usize;
    if n != names.len() {
        return Err(corrupt(format!("{n} tensors, expected {}", names.len())));
    }
    for (expected, t) in names.iter().zip(params.tensors_mut()) {
        let name = binio::read_str(r)?;
        let rows = binio::read_u32(r)? as usize;
        let cols = binio::read_u32(r)? as usize;
        let data = binio::read_f64s(r)?;
        if &name != expected || rows != t.rows || cols != t.cols || data.len() != rows * cols {
            return Err(corrupt(format!(
                "tensor {name} {rows}×{cols} does not match {expected}"
            )));
        }
        t.data = data;
    }
    Ok(TrainedModel {
        kind,
        config,
        params,
        class_map,
    })
}

pub fn save_model(path: impl AsRef<Path>, m: &TrainedModel) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path).map_err(FormatError::Io)?);
    write_model(&mut w, m)?;
    w.flush().map_err(FormatError::Io)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel, ModelError> {
    let mut r = BufReader::new(File::open(path).map_err(FormatError::Io)?);
    read_model(&mut r)
}
