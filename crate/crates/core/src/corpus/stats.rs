use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::IssueSet;
use crate::par;
use crate::textnorm::{is_code_like, TextNormalizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectStats {
    pub issues: usize,
    /// Distinct tokens over title + description.
    pub vocab_size: usize,
    /// Mean, over the vocabulary, of the number of issues containing the token.
    pub avg_appearance: f64,
    /// Issues containing each special tag.
    pub tag_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub normalized: bool,
    pub total_issues: usize,
    pub tag_counts: BTreeMap<String, usize>,
    /// Issues with at least one whitespace token that looks like code.
    pub code_like_issues: usize,
    pub projects: BTreeMap<String, ProjectStats>,
}

/// Whitespace tokens with punctuation stripped from both ends.
pub fn raw_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
}

struct IssueSummary {
    tokens: BTreeSet<String>,
    tags: BTreeSet<String>,
    code_like: bool,
}

fn summarize(norm: &TextNormalizer, normalized: bool, title: &str, desc: &str) -> IssueSummary {
    let tokens = if normalized {
        norm.issue_tokens(title, desc).into_iter().collect()
    } else {
        raw_tokens(title)
            .chain(raw_tokens(desc))
            .map(str::to_string)
            .collect()
    };
    let tags = norm
        .detect_special_tags(title)
        .into_iter()
        .chain(norm.detect_special_tags(desc))
        .map(|t| t.pattern)
        .collect();
    let code_like = title
        .split_whitespace()
        .chain(desc.split_whitespace())
        .any(is_code_like);
    IssueSummary {
        tokens,
        tags,
        code_like,
    }
}

fn vocab_stats<'a>(summaries: impl Iterator<Item = &'a IssueSummary>) -> (usize, f64) {
    let mut df: HashMap<&str, usize> = HashMap::new();
    for s in summaries {
        for t in &s.tokens {
            *df.entry(t.as_str()).or_default() += 1;
        }
    }
    let vocab = df.len();
    let avg = if vocab == 0 {
        0.0
    } else {
        let total: usize = df.values().sum();
        total as f64 / vocab as f64
    };
    (vocab, avg)
}

/// Vocabulary, average appearance and special-tag counts, per project and
/// overall. `normalized` switches from raw whitespace tokens to the
/// normalizer's output.
pub fn corpus_stats(set: &IssueSet, normalized: bool, norm: &TextNormalizer) -> CorpusStats {
    let summaries = par::map(set.issues(), |i| {
        summarize(norm, normalized, &i.title, &i.description)
    });

    let empty_tags: BTreeMap<String, usize> =
        norm.tag_patterns().iter().map(|p| (p.clone(), 0)).collect();
    let count_tags = |idx: &mut dyn Iterator<Item = &IssueSummary>| {
        let mut counts = empty_tags.clone();
        for s in idx {
            for t in &s.tags {
                *counts.entry(t.clone()).or_default() += 1;
            }
        }
        counts
    };

    let mut projects = BTreeMap::new();
    for project in set.projects() {
        let members: Vec<&IssueSummary> = set
            .issues()
            .iter()
            .zip(&summaries)
            .filter(|(i, _)| i.project == project)
            .map(|(_, s)| s)
            .collect();
        let (vocab_size, avg_appearance) = vocab_stats(members.iter().copied());
        projects.insert(
            project.to_string(),
            ProjectStats {
                issues: members.len(),
                vocab_size,
                avg_appearance,
                tag_counts: count_tags(&mut members.iter().copied()),
            },
        );
    }

    CorpusStats {
        normalized,
        total_issues: set.len(),
        tag_counts: count_tags(&mut summaries.iter()),
        code_like_issues: summaries.iter().filter(|s| s.code_like).count(),
        projects,
    }
}
