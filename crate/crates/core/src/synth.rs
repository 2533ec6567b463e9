//! Synthetic graphs with planted structurally equivalent node pairs.
//!
//! Copies of a motif (star or clique) hang off homophilous background
//! communities through connector paths. Centers of motifs from the same
//! group have identical local structure and sit at least two connector
//! lengths apart, so every same-group center pair is a planted positive.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotifKind {
    /// Center plus `size` leaves.
    Star,
    /// `size` mutually adjacent nodes; the center is one of them.
    Clique,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MotifGroup {
    pub kind: MotifKind,
    pub size: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedParams {
    pub motifs: Vec<MotifGroup>,
    /// Edges on the path from a motif center to its anchor.
    pub path_length: usize,
    /// Hop limit the planted pairs must satisfy; needs `path_length > min_hop`.
    pub min_hop: usize,
    pub background_nodes: usize,
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Zero disables features.
    pub feature_dim: usize,
    /// Mean shift on the class block of background node features.
    pub feature_signal: f64,
    /// Mean shift on the class block of motif node features.
    pub motif_feature_signal: f64,
}

impl Default for PlantedParams {
    fn default() -> Self {
        PlantedParams {
            motifs: vec![MotifGroup {
                kind: MotifKind::Star,
                size: 5,
                count: 2,
            }],
            path_length: 7,
            min_hop: 5,
            background_nodes: 0,
            communities: 0,
            p_in: 0.1,
            p_out: 0.005,
            feature_dim: 0,
            feature_signal: 1.0,
            motif_feature_signal: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlantedGraph {
    pub graph: Graph,
    /// Same-group center pairs `(u, v)` with `u < v`, sorted.
    pub planted: Vec<(NodeId, NodeId)>,
    /// Motif center ids per group.
    pub centers: Vec<Vec<NodeId>>,
    /// Every node that belongs to a motif (centers included).
    pub motif_nodes: Vec<NodeId>,
}

impl PlantedParams {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.min_hop == 0 || self.path_length < self.min_hop + 1 {
            return bad(format!(
                "connector length {} must exceed the hop limit {}",
                self.path_length, self.min_hop
            ));
        }
        for g in &self.motifs {
            match g.kind {
                MotifKind::Star if g.size < 1 => {
                    return bad("a star needs at least one leaf".into())
                }
                MotifKind::Clique if g.size < 3 => {
                    return bad("a clique needs at least 3 nodes".into())
                }
                _ => {}
            }
        }
        let total: usize = self.motifs.iter().map(|g| g.count).sum();
        if self.background_nodes == 0 && total > 2 {
            return bad("more than two motifs need a background to attach to".into());
        }
        if self.background_nodes > 0
            && (self.communities == 0 || self.communities > self.background_nodes)
        {
            return bad(format!(
                "{} communities for {} background nodes",
                self.communities, self.background_nodes
            ));
        }
        if self.background_nodes > 0 && total > self.background_nodes {
            return bad("not enough background nodes to anchor every motif".into());
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return bad("edge probabilities must lie in [0, 1]".into());
        }
        Ok(())
    }
}

pub fn generate_planted_graph(seed: u64, params: &PlantedParams) -> Result<PlantedGraph> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut is_motif: Vec<bool> = Vec::new();

    let b = params.background_nodes;
    let c = params.communities;
    for v in 0..b {
        labels.push(v % c);
        is_motif.push(false);
    }
    for u in 0..b {
        for v in u + 1..b {
            let p = if u % c == v % c {
                params.p_in
            } else {
                params.p_out
            };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    // chain each community and link neighboring communities so the
    // background is connected
    for k in 0..c.min(b) {
        let members: Vec<NodeId> = (k..b).step_by(c).collect();
        edges.extend(members.windows(2).map(|w| (w[0], w[1])));
        if k + 1 < c && k + 1 < b {
            edges.push((k, k + 1));
        }
    }

    let connector_label = c + params.motifs.len();
    let mut anchors: Vec<NodeId> = (0..b).collect();
    anchors.shuffle(&mut rng);
    let mut anchor_iter = anchors.into_iter();
    let mut centers: Vec<Vec<NodeId>> = Vec::new();
    let mut motif_nodes = Vec::new();
    let mut pending_center: Option<NodeId> = None;

    let push_node =
        |labels: &mut Vec<usize>, is_motif: &mut Vec<bool>, label: usize, motif: bool| {
            labels.push(label);
            is_motif.push(motif);
            labels.len() - 1
        };

    for (gi, group) in params.motifs.iter().enumerate() {
        let label = c + gi;
        let mut group_centers = Vec::new();
        for _ in 0..group.count {
            let center = push_node(&mut labels, &mut is_motif, label, true);
            motif_nodes.push(center);
            match group.kind {
                MotifKind::Star => {
                    for _ in 0..group.size {
                        let leaf = push_node(&mut labels, &mut is_motif, label, true);
                        motif_nodes.push(leaf);
                        edges.push((center, leaf));
                    }
                }
                MotifKind::Clique => {
                    let mut members = vec![center];
                    for _ in 1..group.size {
                        let m = push_node(&mut labels, &mut is_motif, label, true);
                        motif_nodes.push(m);
                        members.push(m);
                    }
                    for (i, &a) in members.iter().enumerate() {
                        for &z in &members[i + 1..] {
                            edges.push((a, z));
                        }
                    }
                }
            }
            // connector path: center -> path_length - 1 inner nodes -> end
            let end = if b > 0 {
                Some(anchor_iter.next().expect("validated anchor count"))
            } else {
                pending_center
            };
            match end {
                Some(end) => {
                    let path_label = if b > 0 { labels[end] } else { connector_label };
                    let mut prev = center;
                    for _ in 1..params.path_length {
                        let inner = push_node(&mut labels, &mut is_motif, path_label, false);
                        edges.push((prev, inner));
                        prev = inner;
                    }
                    edges.push((prev, end));
                }
                None => pending_center = Some(center),
            }
            group_centers.push(center);
        }
        centers.push(group_centers);
    }

    let n = labels.len();
    let mut graph = Graph::from_edges(n, &edges)?;
    if params.feature_dim > 0 {
        let classes = labels.iter().max().map_or(1, |m| m + 1);
        let block = (params.feature_dim / classes).max(1);
        let mut x = Array2::<f64>::zeros((n, params.feature_dim));
        for v in 0..n {
            for j in 0..params.feature_dim {
                x[[v, j]] = StandardNormal.sample(&mut rng);
            }
            let signal = if is_motif[v] {
                params.motif_feature_signal
            } else {
                params.feature_signal
            };
            let start = (labels[v] * block) % params.feature_dim;
            for j in start..(start + block).min(params.feature_dim) {
                x[[v, j]] += signal;
            }
        }
        graph = graph.with_features(x)?;
    }
    graph = graph.with_labels(labels)?;

    let mut planted = Vec::new();
    for group in &centers {
        for (i, &a) in group.iter().enumerate() {
            for &z in &group[i + 1..] {
                planted.push((a.min(z), a.max(z)));
            }
        }
    }
    planted.sort_unstable();
    motif_nodes.sort_unstable();
    Ok(PlantedGraph {
        graph,
        planted,
        centers,
        motif_nodes,
    })
}
