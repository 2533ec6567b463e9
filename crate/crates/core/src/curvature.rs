//! Ollivier-Ricci edge curvature and degree node values, the two filtration
//! sources.
//!
//! Each node carries a lazy random-walk measure: mass `alpha` stays on the
//! node and `(1 - alpha) / deg` goes to each neighbor. The curvature of an
//! edge `(u, v)` is `1 - W(m_u, m_v)` where `W` is the exact 1-Wasserstein
//! distance under hop distance, solved as a min-cost flow.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{BfsScratch, Graph, NodeId};
use crate::io::{fields, parse_field};
use crate::transport::solve_transport;

pub const DEFAULT_ALPHA: f64 = 0.5;

/// Hop radius that covers every pair of atoms in the measures of two
/// adjacent nodes.
const ADJACENT_SUPPORT_RADIUS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct NodeMeasure {
    pub support: Vec<NodeId>,
    pub mass: Vec<f64>,
}

impl NodeMeasure {
    pub fn mass_at(&self, v: NodeId) -> f64 {
        self.support.binary_search(&v).map_or(0.0, |i| self.mass[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    /// `(source node, target node, mass)` triples.
    pub flows: Vec<(NodeId, NodeId, f64)>,
    pub cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeCurvature {
    pub edge: (NodeId, NodeId),
    pub kappa: f64,
}

pub fn node_measure(g: &Graph, i: NodeId, alpha: f64) -> Result<NodeMeasure> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    if i >= g.num_nodes() {
        return Err(Error::InvalidArgument(format!("node {i} out of range")));
    }
    let nb = g.neighbors(i);
    if nb.is_empty() {
        return Ok(NodeMeasure {
            support: vec![i],
            mass: vec![1.0],
        });
    }
    let share = (1.0 - alpha) / nb.len() as f64;
    let mut atoms: Vec<(NodeId, f64)> = nb.iter().map(|&w| (w, share)).collect();
    atoms.push((i, alpha));
    atoms.sort_unstable_by_key(|a| a.0);
    let (support, mass) = atoms.into_iter().unzip();
    Ok(NodeMeasure { support, mass })
}

/// Exact 1-Wasserstein distance between two measures under hop distance.
pub fn wasserstein(g: &Graph, a: &NodeMeasure, b: &NodeMeasure) -> Result<TransportPlan> {
    let mut scratch = BfsScratch::new(g.num_nodes());
    wasserstein_with(g, a, b, None, &mut scratch)
}

fn wasserstein_with(
    g: &Graph,
    a: &NodeMeasure,
    b: &NodeMeasure,
    max_depth: Option<usize>,
    scratch: &mut BfsScratch,
) -> Result<TransportPlan> {
    let mut cost = Vec::with_capacity(a.support.len());
    for &s in &a.support {
        let mut remaining = b.support.len();
        scratch.run_until(g, s, max_depth, |w| {
            if b.support.binary_search(&w).is_ok() {
                remaining -= 1;
            }
            remaining == 0
        });
        let row = b
            .support
            .iter()
            .map(|&t| {
                scratch.distance(t).map(|d| d as u32).ok_or_else(|| {
                    Error::InvalidArgument(format!("no path between support nodes {s} and {t}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        cost.push(row);
    }
    let sol = solve_transport(&a.mass, &b.mass, &cost);
    Ok(TransportPlan {
        flows: sol
            .flows
            .into_iter()
            .map(|(i, j, m)| (a.support[i], b.support[j], m))
            .collect(),
        cost: sol.cost,
    })
}

pub fn ricci_curvature(g: &Graph, u: NodeId, v: NodeId, alpha: f64) -> Result<EdgeCurvature> {
    let mut scratch = BfsScratch::new(g.num_nodes());
    ricci_with(g, u, v, alpha, &mut scratch)
}

fn ricci_with(
    g: &Graph,
    u: NodeId,
    v: NodeId,
    alpha: f64,
    scratch: &mut BfsScratch,
) -> Result<EdgeCurvature> {
    if u >= g.num_nodes() || v >= g.num_nodes() || !g.has_edge(u, v) {
        return Err(Error::InvalidArgument(format!("({u}, {v}) is not an edge")));
    }
    let mu = node_measure(g, u, alpha)?;
    let mv = node_measure(g, v, alpha)?;
    let plan = wasserstein_with(g, &mu, &mv, Some(ADJACENT_SUPPORT_RADIUS), scratch)?;
    // adjacent endpoints: ground distance d(u, v) = 1
    Ok(EdgeCurvature {
        edge: (u.min(v), u.max(v)),
        kappa: 1.0 - plan.cost,
    })
}

/// Real values on the edges of a graph, keyed by `(u, v)` with `u < v`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeValues {
    edges: Vec<(NodeId, NodeId)>,
    values: Vec<f64>,
}

impl EdgeValues {
    /// `edges` must be sorted and unique with `u < v`.
    pub fn new(edges: Vec<(NodeId, NodeId)>, values: Vec<f64>) -> Result<Self> {
        if edges.len() != values.len() {
            return Err(Error::InvalidArgument("edge/value length mismatch".into()));
        }
        if edges.iter().any(|&(u, v)| u >= v) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "edge keys must be sorted, unique, with u < v".into(),
            ));
        }
        Ok(EdgeValues { edges, values })
    }

    pub fn get(&self, u: NodeId, v: NodeId) -> Option<f64> {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).ok().map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = ((NodeId, NodeId), f64)> + '_ {
        self.edges.iter().copied().zip(self.values.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Curvature of every edge of the full graph, in `g.edges()` order.
/// Parallel over edges; output does not depend on the worker count.
pub fn curvature_all_edges(g: &Graph, alpha: f64) -> Result<EdgeValues> {
    let edges: Vec<_> = g.edges().collect();
    let values = edges
        .par_iter()
        .map_init(
            || BfsScratch::new(g.num_nodes()),
            |scratch, &(u, v)| ricci_with(g, u, v, alpha, scratch).map(|c| c.kappa),
        )
        .collect::<Result<Vec<_>>>()?;
    EdgeValues::new(edges, values)
}

pub fn degree_values(g: &Graph) -> Vec<f64> {
    (0..g.num_nodes()).map(|v| g.degree(v) as f64).collect()
}

/// Writes the curvature cache: a `# graph <hash> alpha <alpha>` header then
/// `u<TAB>v<TAB>kappa` lines.
pub fn write_curvature_cache(
    path: &Path,
    graph_hash: &str,
    alpha: f64,
    values: &EdgeValues,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        writeln!(w, "# graph {graph_hash} alpha {alpha}")?;
        for ((u, v), k) in values.iter() {
            writeln!(w, "{u}\t{v}\t{k}")?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Loads a cache written by [`write_curvature_cache`]. Returns `Ok(None)`
/// when the header does not match `graph_hash` and `alpha`.
pub fn read_curvature_cache(
    path: &Path,
    graph_hash: &str,
    alpha: f64,
) -> Result<Option<EdgeValues>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => return Ok(None),
    };
    if header != format!("# graph {graph_hash} alpha {alpha}") {
        return Ok(None);
    }
    let mut edges = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parts = fields(&line);
        if parts.len() != 3 {
            return Err(Error::Data(format!(
                "{}: malformed cache line {}",
                path.display(),
                lineno + 2
            )));
        }
        edges.push((
            parse_field(parts[0], path, lineno + 1)?,
            parse_field(parts[1], path, lineno + 1)?,
        ));
        values.push(parse_field(parts[2], path, lineno + 1)?);
    }
    EdgeValues::new(edges, values).map(Some)
}
