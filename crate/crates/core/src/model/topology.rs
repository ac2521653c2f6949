//! Edge structure consumed by the models.

use crate::issuegraph::{HeteroGraph, NodeType, RelationType};

/// Incoming edges of one node type, grouped by target row and ordered by
/// `(relation slot, source)` within a target.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InEdges {
    pub offsets: Vec<usize>,
    pub slot: Vec<u16>,
    pub src: Vec<u32>,
}

impl InEdges {
    pub fn range(&self, target: usize) -> std::ops::Range<usize> {
        self.offsets[target]..self.offsets[target + 1]
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

/// Node counts plus the relations a model propagates along.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub counts: [usize; NodeType::COUNT],
    /// Active relations; a relation's slot is its position here.
    pub relations: Vec<RelationType>,
    /// `(src, dst)` pairs per slot.
    pub edges: Vec<Vec<(u32, u32)>>,
    /// Indexed by target [`NodeType::index`].
    pub incoming: Vec<InEdges>,
}

impl Topology {
    pub fn new(
        counts: [usize; NodeType::COUNT],
        relations: Vec<RelationType>,
        edges: Vec<Vec<(u32, u32)>>,
    ) -> Self {
        assert_eq!(relations.len(), edges.len());
        let mut per_target: Vec<Vec<(u32, u16, u32)>> = vec![Vec::new(); NodeType::COUNT];
        for (slot, (r, es)) in relations.iter().zip(&edges).enumerate() {
            for &(s, d) in es {
                assert!(
                    (s as usize) < counts[r.src().index()]
                        && (d as usize) < counts[r.dst().index()]
                );
                per_target[r.dst().index()].push((d, slot as u16, s));
            }
        }
        let incoming = per_target
            .into_iter()
            .enumerate()
            .map(|(t, mut list)| {
                list.sort_unstable();
                let mut offsets = vec![0; counts[t] + 1];
                for &(d, _, _) in &list {
                    offsets[d as usize + 1] += 1;
                }
                for i in 0..counts[t] {
                    offsets[i + 1] += offsets[i];
                }
                InEdges {
                    offsets,
                    slot: list.iter().map(|e| e.1).collect(),
                    src: list.iter().map(|e| e.2).collect(),
                }
            })
            .collect();
        Self {
            counts,
            relations,
            edges,
            incoming,
        }
    }

    /// All 14 relations, or only the child → parent ones.
    pub fn from_graph(h: &HeteroGraph, upward_only: bool) -> Self {
        let relations: Vec<RelationType> = RelationType::all()
            .filter(|r| !(upward_only && r.reversed))
            .collect();
        let edges = relations
            .iter()
            .map(|&r| {
                h.relation(r)
                    .iter()
                    .map(|(s, d)| (s as u32, d as u32))
                    .collect()
            })
            .collect();
        let mut counts = [0; NodeType::COUNT];
        for t in NodeType::ALL {
            counts[t.index()] = h.num_nodes(t);
        }
        Self::new(counts, relations, edges)
    }

    pub fn count(&self, t: NodeType) -> usize {
        self.counts[t.index()]
    }

    /// Restriction to the nodes within `hops` incoming steps of any
    /// Document. With `hops` equal to the layer count, Document outputs on
    /// the restriction equal those on the full topology. Returns the kept
    /// original rows per type (ascending); Document rows are all kept.
    pub fn receptive_field(&self, hops: usize) -> (Topology, Vec<Vec<usize>>) {
        let mut keep: Vec<Vec<bool>> = self.counts.iter().map(|&n| vec![false; n]).collect();
        let doc = NodeType::Document.index();
        keep[doc].fill(true);
        let mut frontier: Vec<(usize, usize)> = (0..self.counts[doc]).map(|i| (doc, i)).collect();
        for _ in 0..hops {
            let mut next = Vec::new();
            for &(t, v) in &frontier {
                let inc = &self.incoming[t];
                for e in inc.range(v) {
                    let st = self.relations[inc.slot[e] as usize].src().index();
                    let s = inc.src[e] as usize;
                    if !keep[st][s] {
                        keep[st][s] = true;
                        next.push((st, s));
                    }
                }
            }
            frontier = next;
        }
        let rows: Vec<Vec<usize>> = keep
            .iter()
            .map(|k| (0..k.len()).filter(|&i| k[i]).collect())
            .collect();
        let mut remap: Vec<Vec<u32>> = self.counts.iter().map(|&n| vec![u32::MAX; n]).collect();
        for (t, rs) in rows.iter().enumerate() {
            for (new, &old) in rs.iter().enumerate() {
                remap[t][old] = new as u32;
            }
        }
        let edges = self
            .relations
            .iter()
            .zip(&self.edges)
            .map(|(r, es)| {
                let (st, dt) = (r.src().index(), r.dst().index());
                es.iter()
                    .filter(|&&(s, d)| keep[st][s as usize] && keep[dt][d as usize])
                    .map(|&(s, d)| (remap[st][s as usize], remap[dt][d as usize]))
                    .collect()
            })
            .collect();
        let mut counts = [0; NodeType::COUNT];
        for (t, rs) in rows.iter().enumerate() {
            counts[t] = rs.len();
        }
        (Topology::new(counts, self.relations.clone(), edges), rows)
    }
}

/// Symmetric-normalized adjacency with self loops, `D^-1/2 (A + I) D^-1/2`,
/// stored as CSR over global node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdjacency {
    pub n: usize,
    pub offsets: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl NormAdjacency {
    /// `edges` are undirected `(a, b)` pairs without self loops; `degree`
    /// counts the self loop. Passing degrees of a larger graph keeps the
    /// normalization of that graph on a restriction of it.
    pub fn new(n: usize, edges: &[(u32, u32)], degree: &[usize]) -> Self {
        let mut rows: Vec<Vec<u32>> = (0..n as u32).map(|i| vec![i]).collect();
        for &(a, b) in edges {
            rows[a as usize].push(b);
            rows[b as usize].push(a);
        }
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (i, mut r) in rows.into_iter().enumerate() {
            r.sort_unstable();
            for j in r {
                cols.push(j);
                vals.push(1.0 / ((degree[i] * degree[j as usize]) as f64).sqrt());
            }
            offsets.push(cols.len());
        }
        Self {
            n,
            offsets,
            cols,
            vals,
        }
    }

    /// `Â·x`.
    pub fn apply(&self, x: &super::Matrix) -> super::Matrix {
        let mut out = super::Matrix::zeros(self.n, x.cols);
        let rows = crate::par::map_range(self.n, |i| {
            let mut acc = vec![0.0; x.cols];
            for e in self.offsets[i]..self.offsets[i + 1] {
                let w = self.vals[e];
                acc.iter_mut()
                    .zip(x.row(self.cols[e] as usize))
                    .for_each(|(a, b)| *a += w * b);
            }
            acc
        });
        for (i, r) in rows.into_iter().enumerate() {
            out.row_mut(i).copy_from_slice(&r);
        }
        out
    }
}
