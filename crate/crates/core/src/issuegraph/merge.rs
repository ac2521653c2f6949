use std::collections::{BTreeMap, BTreeSet};

use super::{BaseRelation, EdgeList, GraphError, HeteroGraph, IssueGraph, NodeType, RelationType};
use crate::corpus::SplitMasks;

fn identity_key(issue: &str, t: NodeType, name: &str) -> String {
    if t.is_terminal() {
        name.to_string()
    } else {
        format!("{issue}/{name}")
    }
}

/// Merges per-issue graphs into one heterogeneous graph.
///
/// Internal nodes are namespaced by issue key; Word and CodeToken nodes are
/// unified by token text within their type. Every node table is sorted by
/// identity key, every edge list by `(src, dst)`, and each upward relation
/// gets an exact mirror. A NaN entry in `labels` marks an unlabeled issue.
pub fn merge_hetero(
    graphs: &[IssueGraph],
    labels: &BTreeMap<String, f64>,
    masks: &SplitMasks,
) -> Result<HeteroGraph, GraphError> {
    let mut seen = BTreeSet::new();
    for g in graphs {
        if !seen.insert(g.issue_key.as_str()) {
            return Err(GraphError::DuplicateIssue(g.issue_key.clone()));
        }
        if !labels.contains_key(&g.issue_key) {
            return Err(GraphError::MissingLabel(g.issue_key.clone()));
        }
        if masks.get(&g.issue_key).is_none() {
            return Err(GraphError::MissingMask(g.issue_key.clone()));
        }
    }

    // key -> (text, tokens) per type; BTreeMap gives the sorted order.
    let mut tables: Vec<BTreeMap<String, (String, Vec<String>)>> =
        vec![BTreeMap::new(); NodeType::COUNT];
    for g in graphs {
        for n in &g.nodes {
            let key = identity_key(&g.issue_key, n.node_type, &n.name);
            tables[n.node_type.index()]
                .entry(key)
                .or_insert_with(|| (n.text.clone(), n.tokens.clone()));
        }
    }

    let mut h = HeteroGraph::empty();
    for (t, table) in tables.into_iter().enumerate() {
        let dst = &mut h.nodes[t];
        for (key, (text, tokens)) in table {
            dst.keys.push(key);
            dst.text.push(text);
            dst.tokens.push(tokens);
        }
    }

    let mut upward: Vec<BTreeSet<(u32, u32)>> = vec![BTreeSet::new(); BaseRelation::ALL.len()];
    for g in graphs {
        let global: Vec<u32> = g
            .nodes
            .iter()
            .map(|n| {
                let key = identity_key(&g.issue_key, n.node_type, &n.name);
                h.nodes[n.node_type.index()]
                    .index_of(&key)
                    .expect("every node was inserted above") as u32
            })
            .collect();
        for &(c, p, rel) in &g.edges {
            upward[rel as usize].insert((global[c as usize], global[p as usize]));
        }
    }
    for (i, set) in upward.into_iter().enumerate() {
        let base = BaseRelation::ALL[i];
        let mut rev: Vec<(u32, u32)> = set.iter().map(|&(s, d)| (d, s)).collect();
        rev.sort_unstable();
        h.edges[RelationType {
            base,
            reversed: false,
        }
        .index()] = edge_list(set);
        h.edges[RelationType {
            base,
            reversed: true,
        }
        .index()] = edge_list(rev);
    }

    let docs = &h.nodes[NodeType::Document.index()];
    for key in &docs.keys {
        let issue = key.strip_suffix("/Document").expect("document key shape");
        h.issue_keys.push(issue.to_string());
        h.labels.push(labels[issue]);
        h.splits.push(masks.get(issue).expect("checked above"));
    }
    Ok(h)
}

fn edge_list(pairs: impl IntoIterator<Item = (u32, u32)>) -> EdgeList {
    let (src, dst) = pairs.into_iter().unzip();
    EdgeList { src, dst }
}
