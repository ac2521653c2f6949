//! Issue text → sentence and code parts → normalized tokens.
//!
//! Descriptions are cut at special tags (`{code}`, `{noformat}`, ...): text
//! enclosed by an opening and closing tag of one family becomes a code part,
//! the rest is split into sentences. Titles never produce code parts; tags in
//! a title are dropped and the surrounding text is treated as prose.

mod porter;
mod segment;
mod tags;
mod token;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use porter::stem;
pub use segment::{RemovedKind, Segmentation, Warning};
pub use tags::{SpecialTag, TagRole};
pub use token::{is_code_like, normalize_token};

#[derive(Debug, Error)]
pub enum TextNormError {
    #[error(
        "invalid tag pattern {0:?}: expected {{name}}, {{name:literal}}, {{name:*}} or <name>"
    )]
    BadPattern(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenKind {
    Word,
    CodeToken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartKind {
    Sentence,
    CodePart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Title,
    Description,
}

/// Lowercase, nonempty, stemmed token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NormalizedToken {
    pub text: String,
    pub kind: TokenKind,
}

/// One sentence or code part. `span` is a byte range into the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    pub kind: PartKind,
    pub tokens: Vec<NormalizedToken>,
    pub origin: Origin,
    pub span: (usize, usize),
}

/// Tag and delimiter sets. Loadable from the `textnorm.*` keys of the run
/// configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextNormConfig {
    /// Recognized tags. `{name:*}` matches any `{name:...}` variant not
    /// listed explicitly.
    pub special_tags: Vec<String>,
    /// Tags that end a sentence instead of opening a code part.
    pub delimiter_tags: Vec<String>,
    /// Sentence-ending punctuation (effective when followed by whitespace or
    /// the end of the text).
    pub sentence_delimiters: Vec<char>,
    /// Whether a run of line breaks ends a sentence.
    pub newline_delimits: bool,
}

impl Default for TextNormConfig {
    fn default() -> Self {
        Self {
            special_tags: [
                "{code}",
                "{noformat}",
                "{quote}",
                "{code:java}",
                "{code:javascript}",
                "<redacted>",
                "{code:xml}",
                "{code:*}",
            ]
            .map(String::from)
            .to_vec(),
            delimiter_tags: vec!["<redacted>".into()],
            sentence_delimiters: vec!['.', '!', '?', ';'],
            newline_delimits: true,
        }
    }
}

/// Compiled normalizer. Stateless after construction and `Sync`.
#[derive(Debug, Clone)]
pub struct TextNormalizer {
    config: TextNormConfig,
    tags: tags::TagMatcher,
}

impl Default for TextNormalizer {
    fn default() -> Self {
        Self::new(TextNormConfig::default()).expect("default tag set is valid")
    }
}

impl TextNormalizer {
    pub fn new(config: TextNormConfig) -> Result<Self, TextNormError> {
        let tags = tags::TagMatcher::new(&config.special_tags, &config.delimiter_tags)?;
        Ok(Self { config, tags })
    }

    pub fn config(&self) -> &TextNormConfig {
        &self.config
    }

    /// Registered tag patterns in configuration order.
    pub fn tag_patterns(&self) -> &[String] {
        &self.config.special_tags
    }

    /// Non-overlapping tag matches, left to right.
    pub fn detect_special_tags(&self, text: &str) -> Vec<SpecialTag> {
        self.tags.find_all(text)
    }

    pub fn split_to_parts(&self, text: &str, origin: Origin) -> Segmentation {
        segment::split(self, text, origin)
    }

    /// Title parts followed by description parts.
    pub fn issue_parts(&self, title: &str, description: &str) -> (Vec<Part>, Vec<Part>) {
        (
            self.split_to_parts(title, Origin::Title).parts,
            self.split_to_parts(description, Origin::Description).parts,
        )
    }

    /// All normalized token texts of an issue, in order.
    pub fn issue_tokens(&self, title: &str, description: &str) -> Vec<String> {
        let (t, d) = self.issue_parts(title, description);
        t.into_iter()
            .chain(d)
            .flat_map(|p| p.tokens.into_iter().map(|t| t.text))
            .collect()
    }
}
