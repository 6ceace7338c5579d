//! Undirected document graph: edge list, adjacency and its row-normalized
//! (row-stochastic) form.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::{Corpus, NodeId};
use crate::error::{MatanError, Result};

/// Undirected, deduplicated, self-loop-free graph over a fixed id space.
///
/// `nodes` is the active node set (the full range for a loaded graph, a
/// subset for induced subgraphs); `n_nodes` is the size of the id space, so
/// adjacency rows stay indexable by `NodeId` after node splits.
#[derive(Debug, Clone)]
pub struct Graph {
    pub n_nodes: usize,
    pub nodes: Vec<NodeId>,
    /// Canonical `(min, max)` pairs, sorted ascending.
    pub edges: Vec<(NodeId, NodeId)>,
    pub adjacency: Vec<Vec<NodeId>>,
    pub norm_adjacency: Vec<Vec<(NodeId, f64)>>,
    edge_set: HashSet<(NodeId, NodeId)>,
}

impl Graph {
    /// Build a graph from raw pairs: self-loops dropped, duplicates merged,
    /// pairs canonicalized. Errors if no edge survives.
    pub fn from_edges(
        n_nodes: usize,
        pairs: impl IntoIterator<Item = (NodeId, NodeId)>,
        nodes: Option<Vec<NodeId>>,
    ) -> Result<Graph> {
        let mut edge_set = HashSet::new();
        for (a, b) in pairs {
            if a == b {
                continue;
            }
            debug_assert!((a as usize) < n_nodes && (b as usize) < n_nodes);
            edge_set.insert((a.min(b), a.max(b)));
        }
        if edge_set.is_empty() {
            return Err(MatanError::EmptyGraph(
                "no edges survived deduplication and self-loop removal".into(),
            ));
        }
        let mut edges: Vec<(NodeId, NodeId)> = edge_set.iter().copied().collect();
        edges.sort_unstable();

        let mut adjacency = vec![Vec::new(); n_nodes];
        for &(a, b) in &edges {
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        let norm_adjacency = normalized_adjacency(&adjacency);
        let nodes = nodes.unwrap_or_else(|| (0..n_nodes as NodeId).collect());

        Ok(Graph { n_nodes, nodes, edges, adjacency, norm_adjacency, edge_set })
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node as usize].len()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edge_set.contains(&(a.min(b), a.max(b)))
    }
}

/// Row-normalize a binary adjacency into a row-stochastic matrix: each row
/// divided by its degree, zero rows (isolated nodes) left all-zero.
pub fn normalized_adjacency(adjacency: &[Vec<NodeId>]) -> Vec<Vec<(NodeId, f64)>> {
    adjacency
        .iter()
        .map(|row| {
            if row.is_empty() {
                Vec::new()
            } else {
                let w = 1.0 / row.len() as f64;
                row.iter().map(|&n| (n, w)).collect()
            }
        })
        .collect()
}

/// Counts of input lines dropped while loading an edges file.
#[derive(Debug, Default, Clone, Copy)]
pub struct EdgeLoadReport {
    pub unknown_ids: usize,
    pub self_loops: usize,
    pub duplicates: usize,
}

/// Load an edges file (`<external-id>\t<external-id>` per line) against a
/// corpus. Lines naming unknown ids are skipped and counted; self-loops and
/// duplicate undirected pairs are dropped.
pub fn load_edges(path: &Path, corpus: &Corpus) -> Result<(Graph, EdgeLoadReport)> {
    let file = File::open(path).map_err(|e| MatanError::io(path, e))?;
    let reader = BufReader::new(file);

    let mut report = EdgeLoadReport::default();
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MatanError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once('\t')
            .ok_or_else(|| MatanError::parse(path, lineno + 1, "expected <id>\\t<id>"))?;
        let (Some(u), Some(v)) = (corpus.node_of(a), corpus.node_of(b)) else {
            report.unknown_ids += 1;
            continue;
        };
        if u == v {
            report.self_loops += 1;
            continue;
        }
        if !seen.insert((u.min(v), u.max(v))) {
            report.duplicates += 1;
            continue;
        }
        pairs.push((u, v));
    }

    let graph = Graph::from_edges(corpus.n_nodes(), pairs, None)?;
    Ok((graph, report))
}
