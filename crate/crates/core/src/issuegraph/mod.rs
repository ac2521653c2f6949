//! Typed issue graphs.
//!
//! Each issue becomes a small tree (Document → Title/Description →
//! Sentence/CodePart) whose leaves are Word and CodeToken nodes. Merging
//! many issue graphs keeps internal nodes per issue and unifies leaves by
//! `(token, type)`, so issues sharing vocabulary are connected.

mod build;
mod homo;
mod io;
mod merge;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Issue, Split, SplitMasks};
use crate::textnorm::TextNormalizer;

pub use build::{build_issue_graph, IssueGraph, LocalNode};
pub use homo::{type_erase, HomoGraph};
pub use io::{load_graph, read_graph, save_graph, write_graph, write_json_dump};
pub use merge::merge_hetero;

/// Which issue fields feed the graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    #[default]
    Full,
    TitleOnly,
    DescriptionOnly,
}

impl InputMode {
    /// The `(title, description)` text actually used.
    pub fn select(self, issue: &Issue) -> (&str, &str) {
        match self {
            InputMode::Full => (&issue.title, &issue.description),
            InputMode::TitleOnly => (&issue.title, ""),
            InputMode::DescriptionOnly => ("", &issue.description),
        }
    }
}

/// A merged graph plus the issues that produced no parts and were left out.
#[derive(Debug, Clone)]
pub struct BuiltGraph {
    pub graph: HeteroGraph,
    pub dropped: Vec<String>,
}

/// Normalizes, builds and merges `issues` (issues are processed in parallel,
/// merging is sequential). Issues without any parts under `mode` are
/// dropped rather than failing the whole build.
pub fn graph_from_issues(
    issues: &[&Issue],
    norm: &TextNormalizer,
    mode: InputMode,
    masks: &SplitMasks,
) -> Result<BuiltGraph, GraphError> {
    let built = crate::par::map(issues, |issue| {
        let (title, desc) = mode.select(issue);
        let (pt, pd) = norm.issue_parts(title, desc);
        let mut view = (*issue).clone();
        view.title = title.to_string();
        view.description = desc.to_string();
        build_issue_graph(&view, &pt, &pd)
    });
    let mut graphs = Vec::with_capacity(built.len());
    let mut dropped = Vec::new();
    for r in built {
        match r {
            Ok(g) => graphs.push(g),
            Err(GraphError::EmptyIssue(key)) => dropped.push(key),
            Err(e) => return Err(e),
        }
    }
    let labels = issues
        .iter()
        .map(|i| (i.issue_key.clone(), i.story_point.unwrap_or(f64::NAN)))
        .collect();
    let graph = merge_hetero(&graphs, &labels, masks)?;
    Ok(BuiltGraph { graph, dropped })
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("issue {0:?} produced no parts")]
    EmptyIssue(String),
    #[error("duplicate issue {0:?}")]
    DuplicateIssue(String),
    #[error("issue {0:?} has no label")]
    MissingLabel(String),
    #[error("issue {0:?} has no split assignment")]
    MissingMask(String),
    #[error(transparent)]
    Format(#[from] crate::binio::FormatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    Document,
    Title,
    Description,
    Sentence,
    CodePart,
    Word,
    CodeToken,
}

impl NodeType {
    pub const COUNT: usize = 7;
    pub const ALL: [NodeType; 7] = [
        NodeType::Document,
        NodeType::Title,
        NodeType::Description,
        NodeType::Sentence,
        NodeType::CodePart,
        NodeType::Word,
        NodeType::CodeToken,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, NodeType::Word | NodeType::CodeToken)
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeType::Document => "Document",
            NodeType::Title => "Title",
            NodeType::Description => "Description",
            NodeType::Sentence => "Sentence",
            NodeType::CodePart => "CodePart",
            NodeType::Word => "Word",
            NodeType::CodeToken => "CodeToken",
        }
    }
}

/// The seven child → parent relations of the issue hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaseRelation {
    TitleOf,
    DescOf,
    SentOfTitle,
    SentOfDesc,
    CodeOfDesc,
    WordIn,
    TokenIn,
}

impl BaseRelation {
    pub const ALL: [BaseRelation; 7] = [
        BaseRelation::TitleOf,
        BaseRelation::DescOf,
        BaseRelation::SentOfTitle,
        BaseRelation::SentOfDesc,
        BaseRelation::CodeOfDesc,
        BaseRelation::WordIn,
        BaseRelation::TokenIn,
    ];

    /// `(child type, parent type)`.
    pub fn endpoints(self) -> (NodeType, NodeType) {
        use NodeType::*;
        match self {
            BaseRelation::TitleOf => (Title, Document),
            BaseRelation::DescOf => (Description, Document),
            BaseRelation::SentOfTitle => (Sentence, Title),
            BaseRelation::SentOfDesc => (Sentence, Description),
            BaseRelation::CodeOfDesc => (CodePart, Description),
            BaseRelation::WordIn => (Word, Sentence),
            BaseRelation::TokenIn => (CodeToken, CodePart),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaseRelation::TitleOf => "title_of",
            BaseRelation::DescOf => "desc_of",
            BaseRelation::SentOfTitle => "sent_of_title",
            BaseRelation::SentOfDesc => "sent_of_desc",
            BaseRelation::CodeOfDesc => "code_of_desc",
            BaseRelation::WordIn => "word_in",
            BaseRelation::TokenIn => "token_in",
        }
    }

    /// The relation linking a child of type `child` to a parent of type `parent`.
    pub fn between(child: NodeType, parent: NodeType) -> Option<BaseRelation> {
        BaseRelation::ALL
            .into_iter()
            .find(|r| r.endpoints() == (child, parent))
    }
}

/// A directed relation: a base relation (child → parent) or its mirror.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationType {
    pub base: BaseRelation,
    pub reversed: bool,
}

impl RelationType {
    pub const COUNT: usize = 14;

    pub fn all() -> impl Iterator<Item = RelationType> {
        [false, true].into_iter().flat_map(|reversed| {
            BaseRelation::ALL
                .into_iter()
                .map(move |base| RelationType { base, reversed })
        })
    }

    pub fn index(self) -> usize {
        self.base as usize + if self.reversed { 7 } else { 0 }
    }

    pub fn from_index(i: usize) -> RelationType {
        RelationType {
            base: BaseRelation::ALL[i % 7],
            reversed: i >= 7,
        }
    }

    pub fn src(self) -> NodeType {
        let (c, p) = self.base.endpoints();
        if self.reversed {
            p
        } else {
            c
        }
    }

    pub fn dst(self) -> NodeType {
        let (c, p) = self.base.endpoints();
        if self.reversed {
            c
        } else {
            p
        }
    }

    pub fn name(self) -> String {
        if self.reversed {
            format!("rev_{}", self.base.name())
        } else {
            self.base.name().to_string()
        }
    }
}

/// Node table of one type. Rows are sorted by identity key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeTable {
    /// `issue/name` for per-issue nodes, the token text for shared ones.
    pub keys: Vec<String>,
    /// Covered text; the token itself for terminal nodes.
    pub text: Vec<String>,
    /// Normalized tokens covered by an internal node, in order. Empty for
    /// terminal nodes.
    pub tokens: Vec<Vec<String>>,
}

impl NodeTable {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.keys.binary_search_by(|k| k.as_str().cmp(key)).ok()
    }
}

/// Directed edges of one relation as parallel `src`/`dst` index arrays,
/// sorted by `(src, dst)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeList {
    pub src: Vec<u32>,
    pub dst: Vec<u32>,
}

impl EdgeList {
    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.src
            .iter()
            .zip(&self.dst)
            .map(|(&s, &d)| (s as usize, d as usize))
    }
}

/// The merged heterogeneous graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroGraph {
    /// Indexed by [`NodeType::index`].
    pub nodes: Vec<NodeTable>,
    /// Indexed by [`RelationType::index`].
    pub edges: Vec<EdgeList>,
    /// Issue key of each Document row.
    pub issue_keys: Vec<String>,
    /// Story point per Document row; NaN when unlabeled.
    pub labels: Vec<f64>,
    pub splits: Vec<Split>,
}

impl HeteroGraph {
    pub fn empty() -> Self {
        Self {
            nodes: vec![NodeTable::default(); NodeType::COUNT],
            edges: vec![EdgeList::default(); RelationType::COUNT],
            issue_keys: Vec::new(),
            labels: Vec::new(),
            splits: Vec::new(),
        }
    }

    pub fn table(&self, t: NodeType) -> &NodeTable {
        &self.nodes[t.index()]
    }

    pub fn relation(&self, r: RelationType) -> &EdgeList {
        &self.edges[r.index()]
    }

    pub fn num_nodes(&self, t: NodeType) -> usize {
        self.nodes[t.index()].len()
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.iter().map(NodeTable::len).sum()
    }

    pub fn num_documents(&self) -> usize {
        self.num_nodes(NodeType::Document)
    }

    /// Document rows assigned to `split`.
    pub fn documents_in(&self, split: Split) -> Vec<usize> {
        (0..self.splits.len())
            .filter(|&i| self.splits[i] == split)
            .collect()
    }

    pub fn document_index(&self, issue_key: &str) -> Option<usize> {
        self.table(NodeType::Document)
            .index_of(&format!("{issue_key}/Document"))
    }
}
