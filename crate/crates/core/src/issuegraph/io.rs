//! Graph checkpoint (`SPHG`, version 1) and JSON debug dump.
//!
//! Layout after the header:
//! - 7 node tables in `NodeType` order: keys, texts, then per-row token lists
//! - 14 edge lists in `RelationType` index order: src, dst (`u32` blocks)
//! - issue keys, labels (`f64` block), split codes (`u32` block)

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EdgeList, GraphError, HeteroGraph, NodeTable, NodeType, RelationType};
use crate::binio::{self, FormatError};
use crate::corpus::Split;

const MAGIC: &[u8; 4] = b"SPHG";
const VERSION: u32 = 1;

pub fn write_graph<W: Write>(w: &mut W, h: &HeteroGraph) -> Result<(), FormatError> {
    binio::write_header(w, MAGIC, VERSION)?;
    for table in &h.nodes {
        binio::write_strs(w, &table.keys)?;
        binio::write_strs(w, &table.text)?;
        binio::write_u64(w, table.tokens.len() as u64)?;
        for toks in &table.tokens {
            binio::write_strs(w, toks)?;
        }
    }
    for e in &h.edges {
        binio::write_u32s(w, &e.src)?;
        binio::write_u32s(w, &e.dst)?;
    }
    binio::write_strs(w, &h.issue_keys)?;
    binio::write_f64s(w, &h.labels)?;
    let codes: Vec<u32> = h.splits.iter().map(|s| s.code() as u32).collect();
    binio::write_u32s(w, &codes)?;
    Ok(())
}

pub fn read_graph<R: Read>(r: &mut R) -> Result<HeteroGraph, FormatError> {
    binio::read_header(r, MAGIC, "graph", VERSION)?;
    let mut nodes = Vec::with_capacity(NodeType::COUNT);
    for t in NodeType::ALL {
        let keys = binio::read_strs(r)?;
        let text = binio::read_strs(r)?;
        let n = binio::read_len(r)?;
        let tokens = (0..n)
            .map(|_| binio::read_strs(r))
            .collect::<Result<Vec<_>, _>>()?;
        if text.len() != keys.len() || tokens.len() != keys.len() {
            return Err(FormatError::Corrupt(format!(
                "{} table lengths differ",
                t.name()
            )));
        }
        nodes.push(NodeTable { keys, text, tokens });
    }
    let mut edges = Vec::with_capacity(RelationType::COUNT);
    for i in 0..RelationType::COUNT {
        let rel = RelationType::from_index(i);
        let src = binio::read_u32s(r)?;
        let dst = binio::read_u32s(r)?;
        let (ns, nd) = (
            nodes[rel.src().index()].len(),
            nodes[rel.dst().index()].len(),
        );
        if src.len() != dst.len()
            || src.iter().any(|&s| s as usize >= ns)
            || dst.iter().any(|&d| d as usize >= nd)
        {
            return Err(FormatError::Corrupt(format!(
                "edge list {} out of range",
                rel.name()
            )));
        }
        edges.push(EdgeList { src, dst });
    }
    let issue_keys = binio::read_strs(r)?;
    let labels = binio::read_f64s(r)?;
    let splits = binio::read_u32s(r)?
        .into_iter()
        .map(|c| {
            u8::try_from(c)
                .ok()
                .and_then(Split::from_code)
                .ok_or_else(|| FormatError::Corrupt(format!("split code {c}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let docs = nodes[NodeType::Document.index()].len();
    if issue_keys.len() != docs || labels.len() != docs || splits.len() != docs {
        return Err(FormatError::Corrupt(
            "document vectors differ from table".into(),
        ));
    }
    Ok(HeteroGraph {
        nodes,
        edges,
        issue_keys,
        labels,
        splits,
    })
}

pub fn save_graph(path: impl AsRef<Path>, h: &HeteroGraph) -> Result<(), GraphError> {
    let mut w = BufWriter::new(File::create(path).map_err(FormatError::Io)?);
    write_graph(&mut w, h)?;
    w.flush().map_err(FormatError::Io)?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<HeteroGraph, GraphError> {
    let mut r = BufReader::new(File::open(path).map_err(FormatError::Io)?);
    Ok(read_graph(&mut r)?)
}

/// Writes a human-readable JSON rendering of the graph, with relations
/// keyed by name.
pub fn write_json_dump(path: impl AsRef<Path>, h: &HeteroGraph) -> Result<(), GraphError> {
    let nodes: serde_json::Map<String, serde_json::Value> = NodeType::ALL
        .iter()
        .map(|t| {
            (
                t.name().to_string(),
                serde_json::to_value(h.table(*t)).expect("serializable"),
            )
        })
        .collect();
    let edges: serde_json::Map<String, serde_json::Value> = RelationType::all()
        .map(|r| {
            let pairs: Vec<[usize; 2]> = h.relation(r).iter().map(|(s, d)| [s, d]).collect();
            (r.name(), serde_json::json!(pairs))
        })
        .collect();
    let labels: Vec<Option<f64>> = h
        .labels
        .iter()
        .map(|l| (!l.is_nan()).then_some(*l))
        .collect();
    let doc = serde_json::json!({
        "format": "spgraph-graph-dump",
        "version": VERSION,
        "nodes": nodes,
        "edges": edges,
        "issue_keys": h.issue_keys,
        "labels": labels,
        "splits": h.splits,
    });
    let w = BufWriter::new(File::create(path).map_err(FormatError::Io)?);
    serde_json::to_writer_pretty(w, &doc).map_err(|e| FormatError::Io(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_magic() {
        let bytes = b"XXXX\x01\x00\x00\x00".to_vec();
        assert!(matches!(
            read_graph(&mut bytes.as_slice()),
            Err(FormatError::BadMagic { .. })
        ));
    }

    #[test]
    fn empty_round_trip() {
        let h = HeteroGraph::empty();
        let mut buf = Vec::new();
        write_graph(&mut buf, &h).unwrap();
        assert_eq!(read_graph(&mut buf.as_slice()).unwrap(), h);
    }
}
