//! Sublevel filtrations of ego-nets and their 0/1-dimensional persistence.
//!
//! A graph is a 1-complex, so H1 classes never die: every edge that closes a
//! cycle births an essential H1 point. H0 follows the elder rule with a
//! union-find over the filtration order.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::curvature::EdgeValues;
use crate::error::{Error, Result};
use crate::graph::{ego_net_with, BfsScratch, EgoNet, Graph, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FiltrationSource {
    /// Values live on edges; a node takes the minimum over incident edges.
    EdgeFunction,
    /// Values live on nodes; an edge takes the maximum of its endpoints.
    NodeFunction,
}

/// A raw filtration function on the parent graph.
#[derive(Clone, Copy, Debug)]
pub enum RawFunction<'a> {
    Node(&'a [f64]),
    Edge(&'a EdgeValues),
}

/// Node and edge values of one ego-net, indexed by local id and by position
/// in `EgoNet::local_edges`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiltrationAssignment {
    pub node_values: Vec<f64>,
    pub edge_values: Vec<f64>,
    pub source: FiltrationSource,
}

pub fn lift_values(ego: &EgoNet, raw: RawFunction<'_>) -> Result<FiltrationAssignment> {
    match raw {
        RawFunction::Node(values) => {
            let node_values = ego
                .members
                .iter()
                .map(|&v| {
                    values
                        .get(v)
                        .copied()
                        .ok_or_else(|| Error::InvalidArgument(format!("no value for node {v}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let edge_values = ego
                .local_edge_ids()
                .into_iter()
                .map(|(a, b)| node_values[a].max(node_values[b]))
                .collect();
            Ok(FiltrationAssignment {
                node_values,
                edge_values,
                source: FiltrationSource::NodeFunction,
            })
        }
        RawFunction::Edge(values) => {
            let edge_values = ego
                .local_edges
                .iter()
                .map(|&(u, v)| {
                    values.get(u, v).ok_or_else(|| {
                        Error::InvalidArgument(format!("no value for edge ({u}, {v})"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let floor = edge_values.iter().copied().fold(f64::INFINITY, f64::min);
            let floor = if floor.is_finite() { floor } else { 0.0 };
            let mut node_values = vec![f64::INFINITY; ego.num_nodes()];
            for ((a, b), &x) in ego.local_edge_ids().into_iter().zip(&edge_values) {
                node_values[a] = node_values[a].min(x);
                node_values[b] = node_values[b].min(x);
            }
            for x in &mut node_values {
                if *x == f64::INFINITY {
                    *x = floor;
                }
            }
            Ok(FiltrationAssignment {
                node_values,
                edge_values,
                source: FiltrationSource::EdgeFunction,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Simplex {
    /// Local vertex id.
    Vertex(usize),
    /// Local endpoint ids `(a, b)` with `a < b`.
    Edge(usize, usize),
}

/// Simplices of an ego-net sorted by value; the prefix up to any threshold
/// is the sublevel complex at that threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Filtration {
    pub simplices: Vec<(Simplex, f64)>,
    /// Parent-graph id per local vertex, used for elder-rule ties.
    pub vertex_ids: Vec<NodeId>,
}

/// Orders vertices and edges ascending by value. Ties put vertices before
/// edges, then order by id.
pub fn sublevel_filtration(ego: &EgoNet, fa: &FiltrationAssignment) -> Result<Filtration> {
    build_filtration(ego.members.clone(), &ego.local_edge_ids(), fa)
}

pub(crate) fn build_filtration(
    vertex_ids: Vec<NodeId>,
    edges: &[(usize, usize)],
    fa: &FiltrationAssignment,
) -> Result<Filtration> {
    if fa.node_values.len() != vertex_ids.len() || fa.edge_values.len() != edges.len() {
        return Err(Error::InvalidArgument(
            "filtration values do not match the complex".into(),
        ));
    }
    if fa
        .node_values
        .iter()
        .chain(&fa.edge_values)
        .any(|x| !x.is_finite())
    {
        return Err(Error::Numeric("non-finite filtration value".into()));
    }
    let mut simplices: Vec<(Simplex, f64)> = Vec::with_capacity(vertex_ids.len() + edges.len());
    simplices.extend(
        fa.node_values
            .iter()
            .enumerate()
            .map(|(i, &x)| (Simplex::Vertex(i), x)),
    );
    for (&(a, b), &x) in edges.iter().zip(&fa.edge_values) {
        let (a, b) = (a.min(b), a.max(b));
        if x < fa.node_values[a] || x < fa.node_values[b] {
            return Err(Error::InvalidArgument(format!(
                "edge ({a}, {b}) enters before one of its endpoints"
            )));
        }
        simplices.push((Simplex::Edge(a, b), x));
    }
    let key = |s: &Simplex| match *s {
        Simplex::Vertex(i) => (0u8, vertex_ids[i], 0),
        Simplex::Edge(a, b) => (1u8, vertex_ids[a], vertex_ids[b]),
    };
    simplices.sort_by(|(s, x), (t, y)| x.total_cmp(y).then_with(|| key(s).cmp(&key(t))));
    Ok(Filtration {
        simplices,
        vertex_ids,
    })
}

/// Finite or essential (`death == f64::INFINITY`) points per dimension,
/// each sorted by `(birth, death)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub h0: Vec<(f64, f64)>,
    pub h1: Vec<(f64, f64)>,
    /// H0 merges with birth equal to death, which are not kept in `h0`.
    pub zero_persistence: usize,
}

impl PersistenceDiagram {
    pub fn is_empty(&self) -> bool {
        self.h0.is_empty() && self.h1.is_empty()
    }

    pub fn essential_h0(&self) -> usize {
        self.h0.iter().filter(|p| p.1.is_infinite()).count()
    }

    /// Finite coordinates (births and finite deaths) of all points.
    pub fn finite_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.h0
            .iter()
            .chain(&self.h1)
            .flat_map(|&(b, d)| [b, d])
            .filter(|x| x.is_finite())
    }

    /// Debug dump: `dim<TAB>birth<TAB>death` lines, `inf` for essential deaths.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (dim, points) in [(0, &self.h0), (1, &self.h1)] {
            for &(b, d) in points {
                let death = if d.is_infinite() {
                    "inf".to_string()
                } else {
                    d.to_string()
                };
                let _ = writeln!(out, "{dim}\t{b}\t{death}");
            }
        }
        out
    }
}

struct Components {
    parent: Vec<usize>,
    /// Birth value and parent id of the oldest vertex of each root.
    elder: Vec<(f64, NodeId)>,
}

impl Components {
    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }
}

fn elder_cmp(a: (f64, NodeId), b: (f64, NodeId)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn sort_points(points: &mut [(f64, f64)]) {
    points.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
}

pub fn persistence_diagram(filtration: &Filtration) -> PersistenceDiagram {
    let n = filtration.vertex_ids.len();
    let mut comps = Components {
        parent: (0..n).collect(),
        elder: vec![(f64::NAN, 0); n],
    };
    let mut diagram = PersistenceDiagram::default();
    for &(simplex, value) in &filtration.simplices {
        match simplex {
            Simplex::Vertex(i) => comps.elder[i] = (value, filtration.vertex_ids[i]),
            Simplex::Edge(a, b) => {
                let ra = comps.find(a);
                let rb = comps.find(b);
                if ra == rb {
                    diagram.h1.push((value, f64::INFINITY));
                    continue;
                }
                // the younger component dies; equal births: larger id dies
                let (survivor, dying) = match elder_cmp(comps.elder[ra], comps.elder[rb]) {
                    Ordering::Greater => (rb, ra),
                    _ => (ra, rb),
                };
                let birth = comps.elder[dying].0;
                if value > birth {
                    diagram.h0.push((birth, value));
                } else {
                    diagram.zero_persistence += 1;
                }
                comps.parent[dying] = survivor;
            }
        }
    }
    for v in 0..n {
        if comps.find(v) == v {
            diagram.h0.push((comps.elder[v].0, f64::INFINITY));
        }
    }
    sort_points(&mut diagram.h0);
    sort_points(&mut diagram.h1);
    diagram
}

/// Diagram of the `radius`-hop ego-net of every node, in node order.
pub fn node_diagrams(
    g: &Graph,
    raw: RawFunction<'_>,
    radius: usize,
) -> Result<Vec<PersistenceDiagram>> {
    (0..g.num_nodes())
        .into_par_iter()
        .map_init(
            || BfsScratch::new(g.num_nodes()),
            |scratch, v| {
                let ego = ego_net_with(g, v, radius, scratch)?;
                let fa = lift_values(&ego, raw)?;
                Ok(persistence_diagram(&sublevel_filtration(&ego, &fa)?))
            },
        )
        .collect()
}
