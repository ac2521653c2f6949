use super::{HeteroGraph, NodeType, RelationType};

/// Single-type, single-relation view of a [`HeteroGraph`].
///
/// Global node ids concatenate the per-type tables in [`NodeType::ALL`]
/// order; `offsets[t]` is where type `t` starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomoGraph {
    pub num_nodes: usize,
    pub offsets: [usize; NodeType::COUNT],
    /// Undirected edges as `(min, max)`, sorted and deduplicated.
    pub edges: Vec<(u32, u32)>,
    /// Global id of each Document row.
    pub document_rows: Vec<usize>,
}

impl HomoGraph {
    pub fn global(&self, t: NodeType, row: usize) -> usize {
        self.offsets[t.index()] + row
    }

    /// Degree including the self loop.
    pub fn degrees_with_self_loops(&self) -> Vec<usize> {
        let mut deg = vec![1; self.num_nodes];
        for &(a, b) in &self.edges {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        deg
    }
}

/// Collapses node types and relations; mirrored edge pairs become one
/// undirected edge.
pub fn type_erase(h: &HeteroGraph) -> HomoGraph {
    let mut offsets = [0; NodeType::COUNT];
    let mut acc = 0;
    for t in NodeType::ALL {
        offsets[t.index()] = acc;
        acc += h.num_nodes(t);
    }
    let mut edges: Vec<(u32, u32)> = RelationType::all()
        .flat_map(|r| {
            let (so, do_) = (offsets[r.src().index()], offsets[r.dst().index()]);
            h.relation(r).iter().map(move |(s, d)| {
                let (a, b) = ((so + s) as u32, (do_ + d) as u32);
                (a.min(b), a.max(b))
            })
        })
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let doc = offsets[NodeType::Document.index()];
    HomoGraph {
        num_nodes: acc,
        offsets,
        edges,
        document_rows: (0..h.num_documents()).map(|i| doc + i).collect(),
    }
}
