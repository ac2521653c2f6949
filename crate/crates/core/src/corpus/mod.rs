//! Issue collections: CSV loading, chronological and cross-project splits,
//! vocabulary and special-tag statistics.

mod load;
mod split;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use load::{
    known_project, load_csv, load_dataset_dir, write_csv, ColumnMap, ProjectInfo, DEEP_SE_PROJECTS,
};
pub use split::{split_cross, split_within_project, Scenario, Split, SplitMasks, SplitRatios};
pub use stats::{corpus_stats, raw_tokens, CorpusStats, ProjectStats};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}: story point {value:?} is not a positive number")]
    BadStoryPoint { row: usize, value: String },
    #[error("row {row}: malformed csv: {message}")]
    MalformedCsv { row: usize, message: String },
    #[error("row {row}: title and description are both empty")]
    EmptyText { row: usize },
    #[error("duplicate issue key {0:?}")]
    DuplicateKey(String),
    #[error("unknown project {0:?}")]
    UnknownProject(String),
    #[error("source and target are the same project {0:?}")]
    SameProject(String),
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("no csv files found in {0}")]
    EmptyDirectory(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One tracker record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub issue_key: String,
    /// Project abbreviation, e.g. `CV`.
    pub project: String,
    pub repository: String,
    pub title: String,
    pub description: String,
    /// `None` only for unlabeled prediction inputs.
    pub story_point: Option<f64>,
    /// Zero-based row position in the source file.
    pub ordinal: usize,
}

/// Ordered, immutable collection of issues indexed by project.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IssueSet {
    issues: Vec<Issue>,
    project_index: BTreeMap<String, Vec<usize>>,
}

impl IssueSet {
    /// Builds a set, checking key uniqueness and per-project ordinal order.
    pub fn new(issues: Vec<Issue>) -> Result<Self, CorpusError> {
        let mut seen = std::collections::HashSet::with_capacity(issues.len());
        let mut project_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, issue) in issues.iter().enumerate() {
            if !seen.insert(issue.issue_key.as_str()) {
                return Err(CorpusError::DuplicateKey(issue.issue_key.clone()));
            }
            project_index
                .entry(issue.project.clone())
                .or_default()
                .push(i);
        }
        for idx in project_index.values_mut() {
            idx.sort_by_key(|&i| issues[i].ordinal);
        }
        Ok(Self {
            issues,
            project_index,
        })
    }

    pub fn issues(&self) -> &[Issue] {
        &self.issues
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn projects(&self) -> impl Iterator<Item = &str> {
        self.project_index.keys().map(String::as_str)
    }

    pub fn has_project(&self, project: &str) -> bool {
        self.project_index.contains_key(project)
    }

    /// Issues of one project in ordinal order.
    pub fn project_issues(&self, project: &str) -> Result<Vec<&Issue>, CorpusError> {
        self.project_index
            .get(project)
            .map(|idx| idx.iter().map(|&i| &self.issues[i]).collect())
            .ok_or_else(|| CorpusError::UnknownProject(project.to_string()))
    }

    pub fn get(&self, key: &str) -> Option<&Issue> {
        self.issues.iter().find(|i| i.issue_key == key)
    }

    /// Merges several sets; keys must stay unique.
    pub fn concat(sets: Vec<IssueSet>) -> Result<Self, CorpusError> {
        Self::new(sets.into_iter().flat_map(|s| s.issues).collect())
    }

    /// SHA-256 over every field of every issue, in order, hex encoded.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for i in &self.issues {
            for field in [
                &i.issue_key,
                &i.project,
                &i.repository,
                &i.title,
                &i.description,
            ] {
                h.update((field.len() as u64).to_le_bytes());
                h.update(field.as_bytes());
            }
            h.update(i.story_point.unwrap_or(f64::NAN).to_le_bytes());
            h.update((i.ordinal as u64).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
