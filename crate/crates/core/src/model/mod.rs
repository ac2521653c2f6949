//! Graph models for story-point prediction at Document nodes: the
//! heterogeneous graph transformer, a GCN baseline on the type-erased graph,
//! losses, Adam, and the full-batch training loop.

pub mod gcn;
pub mod hgt;
mod io;
mod loss;
mod params;
pub mod tensor;
pub mod topology;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gcn::{gcn_backward, gcn_forward, GcnParams};
pub use hgt::{
    hgt_backward, hgt_backward_with, hgt_forward, hgt_layer_forward, HgtLayer, HgtParams, HgtShape,
};
pub use io::{load_model, read_model, save_model, write_model};
pub use loss::{loss_ce, loss_l1};
pub use params::{Adam, Linear, Parameters};
pub use tensor::Matrix;
pub use topology::{NormAdjacency, Topology};
pub use train::{
    features_to_matrices, predict, predict_outputs, prepare, train, EpochRecord, ModelParams,
    Prepared, TrainOutcome, TrainTrace, TrainedModel,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss mask is empty")]
    EmptyMask,
    #[error("label {label} at row {row} outside {classes} classes")]
    BadLabel {
        row: usize,
        label: usize,
        classes: usize,
    },
    #[error("non-finite {what} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, what: String },
    #[error("loss mask row {row} is not a labeled Train document")]
    MaskViolation { row: usize },
    #[error("classification needs at least two distinct Train labels, found {0}")]
    TooFewClasses(usize),
    #[error("invalid model config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Format(#[from] crate::binio::FormatError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Hgt,
    Gcn,
}

/// Model and optimizer settings. GCN uses `layers`, `hidden` and the
/// optimizer fields; `heads` and `upward_only` are HGT-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HgtConfig {
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub task: Task,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub input_dim: usize,
    /// Propagate only child → parent.
    pub upward_only: bool,
    /// Predict with the parameters of the best Valid-MAE epoch instead of
    /// the final ones (when a Valid split exists).
    pub select_best_valid: bool,
}

impl Default for HgtConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            heads: 4,
            hidden: 128,
            epochs: 500,
            task: Task::Regression,
            learning_rate: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            input_dim: 100,
            upward_only: false,
            select_best_valid: false,
        }
    }
}

impl HgtConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::BadConfig(m.to_string()));
        if self.layers == 0 {
            return bad("layers must be at least 1");
        }
        if self.heads == 0 || self.hidden == 0 || !self.hidden.is_multiple_of(self.heads) {
            return bad("hidden must be a positive multiple of heads");
        }
        if self.input_dim == 0 {
            return bad("input_dim must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0
        {
            return bad("adam betas must be in [0,1) and eps positive");
        }
        Ok(())
    }
}

/// Story-point classes observed in Train, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMap {
    pub classes: Vec<f64>,
}

impl ClassMap {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Result<Self, ModelError> {
        let mut classes: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
        classes.sort_by(f64::total_cmp);
        classes.dedup();
        if classes.len() < 2 {
            return Err(ModelError::TooFewClasses(classes.len()));
        }
        Ok(Self { classes })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn value_of(&self, class: usize) -> f64 {
        self.classes[class]
    }

    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.classes.iter().position(|c| *c == value)
    }

    /// Closest class; ties go to the smaller value.
    pub fn nearest(&self, value: f64) -> usize {
        let mut best = 0;
        for (i, c) in self.classes.iter().enumerate() {
            if (c - value).abs() < (self.classes[best] - value).abs() {
                best = i;
            }
        }
        best
    }
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in row.iter().enumerate() {
        if *x > row[best] {
            best = i;
        }
    }
    best
}
