//! Exact discrete optimal transport by successive shortest paths.
//!
//! Capacities (masses) are `f64`, ground costs are small non-negative
//! integers, so node potentials and reduced costs stay exact integers.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Residual capacity below which an arc counts as saturated.
const SATURATED: f64 = 1e-14;
const INF_COST: i64 = i64::MAX / 4;

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    residual: f64,
    cost: i64,
}

/// Min-cost flow network with paired forward/backward arcs.
#[derive(Clone, Debug)]
pub struct MinCostFlow {
    arcs: Vec<Arc>,
    adjacency: Vec<Vec<usize>>,
}

impl MinCostFlow {
    pub fn new(num_nodes: usize) -> Self {
        MinCostFlow {
            arcs: Vec::new(),
            adjacency: vec![Vec::new(); num_nodes],
        }
    }

    /// Adds `from -> to` with capacity and non-negative cost; returns the
    /// arc index (its flow is the residual of arc `index ^ 1`).
    pub fn add_arc(&mut self, from: usize, to: usize, capacity: f64, cost: i64) -> usize {
        debug_assert!(cost >= 0);
        let id = self.arcs.len();
        self.arcs.push(Arc {
            to,
            residual: capacity,
            cost,
        });
        self.arcs.push(Arc {
            to: from,
            residual: 0.0,
            cost: -cost,
        });
        self.adjacency[from].push(id);
        self.adjacency[to].push(id + 1);
        id
    }

    pub fn flow_on(&self, arc: usize) -> f64 {
        self.arcs[arc ^ 1].residual
    }

    /// Pushes up to `limit` units from `source` to `sink` at minimum cost.
    /// Returns the amount sent.
    pub fn run(&mut self, source: usize, sink: usize, limit: f64) -> f64 {
        let n = self.adjacency.len();
        let mut potential = vec![0i64; n];
        let mut dist = vec![INF_COST; n];
        let mut parent = vec![usize::MAX; n];
        let mut sent = 0.0;
        while limit - sent > SATURATED {
            dist.fill(INF_COST);
            parent.fill(usize::MAX);
            dist[source] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0i64, source)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &a in &self.adjacency[u] {
                    let arc = &self.arcs[a];
                    if arc.residual <= SATURATED {
                        continue;
                    }
                    let nd = d + arc.cost + potential[u] - potential[arc.to];
                    if nd < dist[arc.to] {
                        dist[arc.to] = nd;
                        parent[arc.to] = a;
                        heap.push(Reverse((nd, arc.to)));
                    }
                }
            }
            if dist[sink] >= INF_COST {
                break;
            }
            let cap = dist[sink];
            for (p, &d) in potential.iter_mut().zip(&dist) {
                *p += d.min(cap);
            }
            let mut push = limit - sent;
            let mut v = sink;
            while v != source {
                let a = parent[v];
                push = push.min(self.arcs[a].residual);
                v = self.arcs[a ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let a = parent[v];
                self.arcs[a].residual -= push;
                self.arcs[a ^ 1].residual += push;
                v = self.arcs[a ^ 1].to;
            }
            sent += push;
        }
        sent
    }
}

/// Solution of a balanced transportation problem.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportSolution {
    /// `(supply index, demand index, mass)` for every positive flow.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

/// Solves min Σ x_ij c_ij subject to row sums `supply` and column sums
/// `demand`. `cost[i][j]` must be a non-negative integer ground distance.
#[allow(clippy::needless_range_loop)]
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[Vec<u32>]) -> TransportSolution {
    let s = supply.len();
    let t = demand.len();
    let source = s + t;
    let sink = s + t + 1;
    let mut net = MinCostFlow::new(s + t + 2);
    for (i, &m) in supply.iter().enumerate() {
        net.add_arc(source, i, m, 0);
    }
    for (j, &m) in demand.iter().enumerate() {
        net.add_arc(s + j, sink, m, 0);
    }
    let total: f64 = supply.iter().sum();
    let mut middle = Vec::with_capacity(s * t);
    for i in 0..s {
        for j in 0..t {
            let a = net.add_arc(i, s + j, total, i64::from(cost[i][j]));
            middle.push((i, j, a));
        }
    }
    net.run(source, sink, total);
    let mut flows = Vec::new();
    let mut total_cost = 0.0;
    for (i, j, a) in middle {
        let f = net.flow_on(a);
        if f > 0.0 {
            total_cost += f * f64::from(cost[i][j]);
            flows.push((i, j, f));
        }
    }
    TransportSolution {
        flows,
        cost: total_cost,
    }
}
