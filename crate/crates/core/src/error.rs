use thiserror::Error;

use crate::binio::FormatError;
use crate::corpus::CorpusError;
use crate::embedding::EmbeddingError;
use crate::harness::HarnessError;
use crate::issuegraph::GraphError;
use crate::model::ModelError;
use crate::textnorm::TextNormError;

/// Crate-level error; each module keeps its own enum.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    TextNorm(#[from] TextNormError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier used in the CLI's machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Corpus(_) => "corpus",
            Error::TextNorm(_) => "textnorm",
            Error::Graph(_) => "graph",
            Error::Embedding(_) => "embedding",
            Error::Model(_) => "model",
            Error::Harness(_) => "harness",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
