//! Undirected simple graphs in compressed adjacency form, BFS utilities,
//! ego-net extraction and label homophily.

use std::collections::VecDeque;

use log::warn;
use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Immutable undirected simple graph.
///
/// Neighbor lists are sorted ascending, symmetric, and free of self-loops and
/// duplicates. Node features and class labels are optional attachments.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    features: Option<Array2<f64>>,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an arbitrary edge sequence. Reversed duplicates
    /// and self-loops are dropped; every id must be below `num_nodes`.
    pub fn from_edges(num_nodes: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        if edges.is_empty() && num_nodes > 0 {
            warn!("graph with {num_nodes} nodes has an empty edge list");
        }
        let mut adjacency: Vec<Vec<NodeId>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u == v {
                continue;
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for mut list in adjacency {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(&list);
            offsets.push(neighbors.len());
        }
        Ok(Graph {
            offsets,
            neighbors,
            features: None,
            labels: None,
        })
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.num_nodes() {
            return Err(Error::Data(format!(
                "feature matrix has {} rows but the graph has {} nodes",
                features.nrows(),
                self.num_nodes()
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.num_nodes() {
            return Err(Error::Data(format!(
                "{} labels supplied for {} nodes",
                labels.len(),
                self.num_nodes()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes())
            .map(|v| self.degree(v))
            .max()
            .unwrap_or(0)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn features(&self) -> Option<&Array2<f64>> {
        self.features.as_ref()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max().map(|m| m + 1))
            .unwrap_or(0)
    }

    /// Component id per node, numbered in order of smallest member.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let n = self.num_nodes();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &w in self.neighbors(u) {
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        (count, comp)
    }

    /// Induced subgraph on the largest connected component (ties broken by
    /// smallest member id). Returns the subgraph and the map from new ids to
    /// original ids; features and labels are carried over.
    pub fn largest_component(&self) -> (Graph, Vec<NodeId>) {
        let (count, comp) = self.components();
        if count <= 1 {
            return (self.clone(), (0..self.num_nodes()).collect());
        }
        let mut sizes = vec![0usize; count];
        for &c in &comp {
            sizes[c] += 1;
        }
        let best = (0..count)
            .max_by_key(|&c| (sizes[c], std::cmp::Reverse(c)))
            .unwrap();
        let kept: Vec<NodeId> = (0..self.num_nodes()).filter(|&v| comp[v] == best).collect();
        (self.induced(&kept), kept)
    }

    /// Induced subgraph on `nodes` (must be sorted, unique); node `nodes[i]`
    /// becomes node `i`.
    pub fn induced(&self, nodes: &[NodeId]) -> Graph {
        let mut edges = Vec::new();
        for (i, &u) in nodes.iter().enumerate() {
            for &w in self.neighbors(u) {
                if w > u {
                    if let Ok(j) = nodes.binary_search(&w) {
                        edges.push((i, j));
                    }
                }
            }
        }
        let mut g = Graph::from_edges(nodes.len(), &edges).expect("induced ids in range");
        if let Some(f) = &self.features {
            g.features = Some(f.select(ndarray::Axis(0), nodes));
        }
        if let Some(l) = &self.labels {
            g.labels = Some(nodes.iter().map(|&v| l[v]).collect());
        }
        g
    }

    /// SHA-256 over the node count and sorted edge list, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.num_nodes() as u64).to_le_bytes());
        for (u, v) in self.edges() {
            hasher.update((u as u64).to_le_bytes());
            hasher.update((v as u64).to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// Reusable BFS buffers. One instance per worker thread.
#[derive(Clone, Debug)]
pub struct BfsScratch {
    stamp: Vec<u32>,
    dist: Vec<u32>,
    epoch: u32,
    queue: VecDeque<NodeId>,
    visited: Vec<NodeId>,
}

impl BfsScratch {
    pub fn new(num_nodes: usize) -> Self {
        BfsScratch {
            stamp: vec![0; num_nodes],
            dist: vec![0; num_nodes],
            epoch: 0,
            queue: VecDeque::new(),
            visited: Vec::new(),
        }
    }

    fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        self.queue.clear();
        self.visited.clear();
    }

    /// Runs BFS from `source` up to `max_depth` hops (unbounded if `None`).
    /// Afterwards `visited()` lists reached nodes in BFS order and
    /// `distance(v)` answers for them.
    pub fn run(&mut self, g: &Graph, source: NodeId, max_depth: Option<usize>) {
        self.run_until(g, source, max_depth, |_| false);
    }

    /// Like [`BfsScratch::run`] but stops as soon as `stop(v)` is true for a
    /// newly reached node.
    pub fn run_until(
        &mut self,
        g: &Graph,
        source: NodeId,
        max_depth: Option<usize>,
        mut stop: impl FnMut(NodeId) -> bool,
    ) {
        self.reset();
        let epoch = self.epoch;
        self.stamp[source] = epoch;
        self.dist[source] = 0;
        self.visited.push(source);
        if stop(source) {
            return;
        }
        self.queue.push_back(source);
        let limit = max_depth.map_or(u32::MAX, |d| d as u32);
        while let Some(u) = self.queue.pop_front() {
            let du = self.dist[u];
            if du >= limit {
                continue;
            }
            for &w in g.neighbors(u) {
                if self.stamp[w] != epoch {
                    self.stamp[w] = epoch;
                    self.dist[w] = du + 1;
                    self.visited.push(w);
                    if stop(w) {
                        return;
                    }
                    self.queue.push_back(w);
                }
            }
        }
    }

    pub fn visited(&self) -> &[NodeId] {
        &self.visited
    }

    pub fn distance(&self, v: NodeId) -> Option<usize> {
        (self.stamp[v] == self.epoch).then(|| self.dist[v] as usize)
    }

    /// True when the last search left unexplored nodes behind its depth limit.
    fn frontier_open(&self, g: &Graph, max_depth: usize) -> bool {
        self.visited.iter().any(|&v| {
            self.dist[v] as usize == max_depth
                && g.neighbors(v).iter().any(|&w| self.stamp[w] != self.epoch)
        })
    }
}

/// Induced subgraph on the r-hop ball around an ego node.
#[derive(Clone, Debug, PartialEq)]
pub struct EgoNet {
    pub ego: NodeId,
    /// Parent ids, sorted; local id of a member is its index here.
    pub members: Vec<NodeId>,
    /// Induced edges as parent ids `(u, v)` with `u < v`, sorted.
    pub local_edges: Vec<(NodeId, NodeId)>,
}

impl EgoNet {
    pub fn local_id(&self, parent: NodeId) -> Option<usize> {
        self.members.binary_search(&parent).ok()
    }

    pub fn num_nodes(&self) -> usize {
        self.members.len()
    }

    /// Edges in local ids, same order as `local_edges`.
    pub fn local_edge_ids(&self) -> Vec<(usize, usize)> {
        self.local_edges
            .iter()
            .map(|&(u, v)| (self.local_id(u).unwrap(), self.local_id(v).unwrap()))
            .collect()
    }
}

pub fn ego_net(g: &Graph, v: NodeId, radius: usize) -> Result<EgoNet> {
    let mut scratch = BfsScratch::new(g.num_nodes());
    ego_net_with(g, v, radius, &mut scratch)
}

pub fn ego_net_with(
    g: &Graph,
    v: NodeId,
    radius: usize,
    scratch: &mut BfsScratch,
) -> Result<EgoNet> {
    if v >= g.num_nodes() {
        return Err(Error::InvalidArgument(format!("ego node {v} out of range")));
    }
    if radius == 0 {
        return Err(Error::InvalidArgument(
            "ego radius must be at least 1".into(),
        ));
    }
    scratch.run(g, v, Some(radius));
    let mut members = scratch.visited().to_vec();
    members.sort_unstable();
    let mut local_edges = Vec::new();
    for &u in &members {
        for &w in g.neighbors(u) {
            if w > u && members.binary_search(&w).is_ok() {
                local_edges.push((u, w));
            }
        }
    }
    Ok(EgoNet {
        ego: v,
        members,
        local_edges,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopDistance {
    Exact(usize),
    /// Not found within the search cap; the true distance is at least this.
    AtLeast(usize),
    Unreachable,
}

impl HopDistance {
    /// Lower bound usable in hop-limit checks (unreachable counts as infinite).
    pub fn lower_bound(self) -> usize {
        match self {
            HopDistance::Exact(d) | HopDistance::AtLeast(d) => d,
            HopDistance::Unreachable => usize::MAX,
        }
    }
}

/// Hop distance searched up to `cap` hops. Returns `AtLeast(cap + 1)` when
/// `v` lies beyond the cap, and `Unreachable` when the search exhausted the
/// component of `u` without finding `v`.
pub fn hop_distance(g: &Graph, u: NodeId, v: NodeId, cap: usize) -> Result<HopDistance> {
    if cap == 0 {
        return Err(Error::InvalidArgument("hop cap must be at least 1".into()));
    }
    check_node(g, u)?;
    check_node(g, v)?;
    let mut scratch = BfsScratch::new(g.num_nodes());
    scratch.run_until(g, u, Some(cap), |w| w == v);
    Ok(match scratch.distance(v) {
        Some(d) => HopDistance::Exact(d),
        None if scratch.frontier_open(g, cap) => HopDistance::AtLeast(cap + 1),
        None => HopDistance::Unreachable,
    })
}

/// Exact hop distance with no cap: `Exact` or `Unreachable`.
pub fn hop_distance_exact(g: &Graph, u: NodeId, v: NodeId) -> Result<HopDistance> {
    check_node(g, u)?;
    check_node(g, v)?;
    let mut scratch = BfsScratch::new(g.num_nodes());
    scratch.run_until(g, u, None, |w| w == v);
    Ok(scratch
        .distance(v)
        .map_or(HopDistance::Unreachable, HopDistance::Exact))
}

fn check_node(g: &Graph, v: NodeId) -> Result<()> {
    if v >= g.num_nodes() {
        return Err(Error::InvalidArgument(format!(
            "node {v} out of range 0..{}",
            g.num_nodes()
        )));
    }
    Ok(())
}

/// Edge homophily: fraction of edges whose endpoints share a label.
pub fn homophily_index(g: &Graph) -> Result<f64> {
    let labels = g
        .labels()
        .ok_or_else(|| Error::Data("homophily index needs node labels".into()))?;
    if g.num_edges() == 0 {
        return Err(Error::Data(
            "homophily index is undefined without edges".into(),
        ));
    }
    let same = g.edges().filter(|&(u, v)| labels[u] == labels[v]).count();
    Ok(same as f64 / g.num_edges() as f64)
}
