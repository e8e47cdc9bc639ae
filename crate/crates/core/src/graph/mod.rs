//! Text-attributed graphs: storage, exact-hop neighborhoods and homophily
//! statistics.
//!
//! Storage is a sparse adjacency list, so memory is linear in `|V| + |E|`.
//! Neighborhood extraction keeps its visited set local to the explored ball
//! rather than allocating per-node arrays.

mod io;
mod synthetic;

pub use io::{load_graph, write_graph, LoadReport};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

pub type NodeId = usize;
pub type ClassId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub text: String,
    pub label: Option<ClassId>,
}

/// Undirected text-attributed graph with dense node ids in `[0, N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextGraph {
    nodes: Vec<Node>,
    adjacency: Vec<Vec<NodeId>>,
    num_classes: usize,
    class_names: Vec<String>,
}

impl TextGraph {
    /// Builds a graph from nodes (indexed by position) and undirected edges.
    ///
    /// Edges are symmetrized; self-loops and duplicates are dropped and
    /// counted in the returned pair `(self_loops, duplicates)`.
    pub fn from_edges(
        nodes: Vec<Node>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
        class_names: Vec<String>,
    ) -> Result<(Self, usize, usize)> {
        let n = nodes.len();
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::Graph(format!(
                    "node at position {i} has id {}; ids must be dense and ordered",
                    node.id
                )));
            }
        }
        let num_classes = class_names.len();
        for node in &nodes {
            if let Some(c) = node.label {
                if c >= num_classes {
                    return Err(Error::Graph(format!(
                        "node {} has label {c} outside [0, {num_classes})",
                        node.id
                    )));
                }
            }
        }

        let mut adjacency = vec![Vec::new(); n];
        let mut self_loops = 0;
        let mut raw = 0usize;
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Graph(format!("edge ({u}, {v}) references a missing node")));
            }
            if u == v {
                self_loops += 1;
                continue;
            }
            raw += 1;
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut kept = 0usize;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            kept += list.len();
        }
        let duplicates = raw - kept / 2;
        Ok((
            TextGraph {
                nodes,
                adjacency,
                num_classes,
                class_names,
            },
            self_loops,
            duplicates,
        ))
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn text(&self, id: NodeId) -> &str {
        &self.nodes[id].text
    }

    pub fn label(&self, id: NodeId) -> Option<ClassId> {
        self.nodes[id].label
    }

    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.adjacency[id]
    }

    pub fn are_adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in id order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// Count of stored records: nodes plus directed adjacency entries.
    pub fn storage_records(&self) -> usize {
        self.nodes.len() + self.adjacency.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.nodes.iter().all(|n| n.label.is_some())
    }

    /// Returns a copy with labels replaced; `labels[i]` is the new label of node `i`.
    pub fn with_labels(&self, labels: &[Option<ClassId>]) -> Result<Self> {
        if labels.len() != self.nodes.len() {
            return Err(Error::Graph("label vector length does not match node count".into()));
        }
        let mut out = self.clone();
        for (node, &l) in out.nodes.iter_mut().zip(labels) {
            if let Some(c) = l {
                if c >= self.num_classes {
                    return Err(Error::Graph(format!("label {c} out of range")));
                }
            }
            node.label = l;
        }
        Ok(out)
    }

    /// SHA-256 over texts and topology only. Labels are excluded so that
    /// every training-stage artifact keyed by this hash is label-independent.
    pub fn structure_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.nodes.len() as u64).to_le_bytes());
        for node in &self.nodes {
            h.update((node.text.len() as u64).to_le_bytes());
            h.update(node.text.as_bytes());
        }
        for (u, list) in self.adjacency.iter().enumerate() {
            h.update((u as u64).to_le_bytes());
            h.update((list.len() as u64).to_le_bytes());
            for &v in list {
                h.update((v as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Nodes at exact shortest-path distance `h` from `source`, for `h` in `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopNeighborhoods {
    pub source: NodeId,
    sets: Vec<Vec<NodeId>>,
}

impl HopNeighborhoods {
    pub fn max_hop(&self) -> usize {
        self.sets.len()
    }

    /// Sorted members of `N_h(source)`; empty for `h == 0` or `h > k`.
    pub fn get(&self, h: usize) -> &[NodeId] {
        if h == 0 || h > self.sets.len() {
            &[]
        } else {
            &self.sets[h - 1]
        }
    }

    pub fn hop_of(&self, node: NodeId) -> Option<usize> {
        self.sets
            .iter()
            .position(|s| s.binary_search(&node).is_ok())
            .map(|i| i + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[NodeId])> {
        self.sets.iter().enumerate().map(|(i, s)| (i + 1, s.as_slice()))
    }
}

/// Bounded BFS of depth `k` from `source`, recording first-visit depth only.
pub fn exact_hop_sets(graph: &TextGraph, source: NodeId, k: usize) -> HopNeighborhoods {
    let mut seen: HashSet<NodeId> = HashSet::new();
    seen.insert(source);
    let mut sets = Vec::with_capacity(k);
    let mut frontier = vec![source];
    for _ in 0..k {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in graph.neighbors(u) {
                if seen.insert(v) {
                    next.push(v);
                }
            }
        }
        next.sort_unstable();
        frontier = next.clone();
        sets.push(next);
    }
    HopNeighborhoods { source, sets }
}

/// Fraction of undirected edges whose endpoints share a class.
pub fn homophily_ratio(graph: &TextGraph) -> Result<f64> {
    if let Some(n) = graph.nodes().iter().find(|n| n.label.is_none()) {
        return Err(Error::Graph(format!("node {} is unlabeled", n.id)));
    }
    let (mut same, mut total) = (0usize, 0usize);
    for (u, v) in graph.edges() {
        total += 1;
        if graph.label(u) == graph.label(v) {
            same += 1;
        }
    }
    if total == 0 {
        return Err(Error::Graph("graph has no edges".into()));
    }
    Ok(same as f64 / total as f64)
}

/// Class agreement between a source and the nodes at exactly `hop` from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopMatch {
    pub hop: usize,
    pub pairs: usize,
    pub matches: usize,
    /// `None` when no source has any node at this hop.
    pub fraction: Option<f64>,
}

/// Same-class fraction at each exact hop distance, pooled over sources.
///
/// With `sample_sources = Some(m)`, `m` sources are drawn without replacement
/// using `seed`; otherwise every node is a source.
pub fn hop_class_match_curve(
    graph: &TextGraph,
    max_hop: usize,
    sample_sources: Option<usize>,
    seed: u64,
) -> Result<Vec<HopMatch>> {
    if max_hop == 0 {
        return Err(Error::config("max_hop", "must be at least 1"));
    }
    if !graph.is_fully_labeled() {
        return Err(Error::Graph("hop class-match curve needs a fully labeled graph".into()));
    }
    let n = graph.num_nodes();
    let sources: Vec<NodeId> = match sample_sources {
        Some(m) if m < n => {
            let mut rng = seed::rng_from(seed::mix(seed, &[seed::tag("hop-curve")]));
            let mut picked = index::sample(&mut rng, n, m).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..n).collect(),
    };

    let mut counts: BTreeMap<usize, (usize, usize)> = (1..=max_hop).map(|h| (h, (0, 0))).collect();
    for &s in &sources {
        let ys = graph.label(s);
        let hops = exact_hop_sets(graph, s, max_hop);
        for (h, members) in hops.iter() {
            let entry = counts.get_mut(&h).expect("hop in range");
            entry.0 += members.len();
            entry.1 += members.iter().filter(|&&v| graph.label(v) == ys).count();
        }
    }
    Ok(counts
        .into_iter()
        .map(|(hop, (pairs, matches))| HopMatch {
            hop,
            pairs,
            matches,
            fraction: (pairs > 0).then(|| matches as f64 / pairs as f64),
        })
        .collect())
}
