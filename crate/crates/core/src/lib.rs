//! Story-point estimation from Agile issue text.
//!
//! Issues (title + description, a mix of prose and quoted code) are
//! normalized, turned into typed per-issue graphs, merged into one
//! heterogeneous graph with shared token nodes, seeded with subword CBOW
//! embeddings and fed to a heterogeneous graph transformer that regresses
//! (or classifies) the story point at each Document node.
//!
//! Module map:
//! - [`corpus`]: CSV loading, splits, corpus statistics
//! - [`textnorm`]: tag detection, part segmentation, token normalization
//! - [`issuegraph`]: per-issue graphs, merged heterogeneous graph, type erasure
//! - [`embedding`]: CBOW + character n-gram embeddings and node features
//! - [`model`]: HGT and GCN with hand-written backward passes, losses, training
//! - [`harness`]: metrics, scenario runners, reports, config, checkpoints

pub mod binio;
pub mod corpus;
pub mod embedding;
pub mod harness;
pub mod issuegraph;
pub mod model;
pub mod par;
pub mod textnorm;

mod error;

pub use error::{Error, Result};
