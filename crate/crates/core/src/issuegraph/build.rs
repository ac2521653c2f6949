use std::collections::{BTreeSet, HashMap};

use super::{BaseRelation, GraphError, NodeType};
use crate::corpus::Issue;
use crate::textnorm::{Part, PartKind, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalNode {
    pub node_type: NodeType,
    /// `Document`, `Title`, `Description`, `T-Sent-k`, `D-Sent-k`,
    /// `D-Code-k`, or the token text for terminal nodes.
    pub name: String,
    pub text: String,
    /// Covered normalized tokens (internal nodes only).
    pub tokens: Vec<String>,
}

/// Per-issue graph. Node ids are positions in `nodes`; edges run child →
/// parent and are deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssueGraph {
    pub issue_key: String,
    pub nodes: Vec<LocalNode>,
    pub edges: BTreeSet<(u32, u32, BaseRelation)>,
}

impl IssueGraph {
    pub fn count(&self, t: NodeType) -> usize {
        self.nodes.iter().filter(|n| n.node_type == t).count()
    }

    pub fn count_edges(&self, r: BaseRelation) -> usize {
        self.edges.iter().filter(|e| e.2 == r).count()
    }

    pub fn node(&self, id: u32) -> &LocalNode {
        &self.nodes[id as usize]
    }
}

struct Builder<'a> {
    g: IssueGraph,
    terminals: HashMap<(TokenKind, &'a str), u32>,
}

impl<'a> Builder<'a> {
    fn add(&mut self, node_type: NodeType, name: String, text: String, tokens: Vec<String>) -> u32 {
        self.g.nodes.push(LocalNode {
            node_type,
            name,
            text,
            tokens,
        });
        (self.g.nodes.len() - 1) as u32
    }

    fn link(&mut self, child: u32, parent: u32) {
        let rel =
            BaseRelation::between(self.g.node(child).node_type, self.g.node(parent).node_type)
                .expect("builder only links hierarchy pairs");
        self.g.edges.insert((child, parent, rel));
    }

    fn terminal(&mut self, kind: TokenKind, text: &'a str) -> u32 {
        if let Some(&id) = self.terminals.get(&(kind, text)) {
            return id;
        }
        let t = match kind {
            TokenKind::Word => NodeType::Word,
            TokenKind::CodeToken => NodeType::CodeToken,
        };
        let id = self.add(t, text.to_string(), text.to_string(), Vec::new());
        self.terminals.insert((kind, text), id);
        id
    }

    /// Attaches `parts` below a Title or Description node.
    fn parts(&mut self, parent: u32, prefix: char, source: &str, parts: &'a [Part]) {
        let (mut n_sent, mut n_code) = (0, 0);
        for part in parts {
            let (t, name) = match part.kind {
                PartKind::Sentence => {
                    n_sent += 1;
                    (NodeType::Sentence, format!("{prefix}-Sent-{n_sent}"))
                }
                PartKind::CodePart => {
                    n_code += 1;
                    (NodeType::CodePart, format!("{prefix}-Code-{n_code}"))
                }
            };
            let text = source
                .get(part.span.0..part.span.1)
                .unwrap_or_default()
                .to_string();
            let tokens = part.tokens.iter().map(|t| t.text.clone()).collect();
            let id = self.add(t, name, text, tokens);
            self.link(id, parent);
            for tok in &part.tokens {
                let leaf = self.terminal(tok.kind, &tok.text);
                self.link(leaf, id);
            }
        }
    }
}

fn covered(parts: &[Part]) -> Vec<String> {
    parts
        .iter()
        .flat_map(|p| p.tokens.iter().map(|t| t.text.clone()))
        .collect()
}

/// Builds the typed graph of one issue from its title and description parts.
///
/// Title/Description nodes exist only when their side produced parts.
/// Terminal nodes are unique per `(token, type)` within the issue.
pub fn build_issue_graph(
    issue: &Issue,
    parts_title: &[Part],
    parts_desc: &[Part],
) -> Result<IssueGraph, GraphError> {
    if parts_title.is_empty() && parts_desc.is_empty() {
        return Err(GraphError::EmptyIssue(issue.issue_key.clone()));
    }
    let mut b = Builder {
        g: IssueGraph {
            issue_key: issue.issue_key.clone(),
            nodes: Vec::new(),
            edges: BTreeSet::new(),
        },
        terminals: HashMap::new(),
    };
    let mut doc_tokens = covered(parts_title);
    doc_tokens.extend(covered(parts_desc));
    let doc_text = match (parts_title.is_empty(), parts_desc.is_empty()) {
        (false, false) => format!("{}\n{}", issue.title, issue.description),
        (false, true) => issue.title.clone(),
        _ => issue.description.clone(),
    };
    let doc = b.add(NodeType::Document, "Document".into(), doc_text, doc_tokens);
    if !parts_title.is_empty() {
        let t = b.add(
            NodeType::Title,
            "Title".into(),
            issue.title.clone(),
            covered(parts_title),
        );
        b.link(t, doc);
        b.parts(t, 'T', &issue.title, parts_title);
    }
    if !parts_desc.is_empty() {
        let d = b.add(
            NodeType::Description,
            "Description".into(),
            issue.description.clone(),
            covered(parts_desc),
        );
        b.link(d, doc);
        b.parts(d, 'D', &issue.description, parts_desc);
    }
    Ok(b.g)
}
