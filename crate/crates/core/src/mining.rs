//! Mining of long-range, structurally equivalent node pairs and the
//! neighbor-bias statistics that motivate them.
//!
//! A pair `(u, v)` is positive when its nodes are at least `delta` hops
//! apart and their persistence images are within `epsilon` of each other.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{BfsScratch, Graph, NodeId};
use crate::io::{fields, parse_field};
use crate::vectorize::PiStore;

/// Node count above which the exhaustive pair scan is replaced by per-node
/// nearest neighbors.
pub const EXHAUSTIVE_NODE_LIMIT: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsilonMode {
    Absolute(f64),
    /// `epsilon` is the q-quantile of distances over the candidate pool.
    Quantile(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateStrategy {
    Exhaustive,
    /// The `k` nearest nodes by image distance, per node.
    Sampled(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiningConfig {
    pub delta: usize,
    pub epsilon: EpsilonMode,
    pub max_pairs_per_node: usize,
    pub strategy: CandidateStrategy,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            delta: 5,
            epsilon: EpsilonMode::Quantile(0.1),
            max_pairs_per_node: 20,
            strategy: CandidateStrategy::Exhaustive,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta < 2 {
            return Err(Error::InvalidArgument(format!(
                "delta {} must be at least 2",
                self.delta
            )));
        }
        match self.epsilon {
            EpsilonMode::Quantile(q) if q.is_nan() || q <= 0.0 || q >= 1.0 => {
                return Err(Error::InvalidArgument(format!(
                    "quantile {q} outside (0, 1)"
                )))
            }
            EpsilonMode::Absolute(e) if e.is_nan() || e < 0.0 => {
                return Err(Error::InvalidArgument(format!(
                    "epsilon {e} must be non-negative"
                )))
            }
            _ => {}
        }
        if self.max_pairs_per_node == 0 {
            return Err(Error::InvalidArgument(
                "max_pairs_per_node must be positive".into(),
            ));
        }
        if self.strategy == CandidateStrategy::Sampled(0) {
            return Err(Error::InvalidArgument(
                "sampled strategy needs k > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositivePair {
    pub u: NodeId,
    pub v: NodeId,
    pub distance: f64,
    pub hop_lower_bound: usize,
}

/// Mined pairs sorted by `(u, v)` with `u < v`.
#[derive(Clone, Debug, PartialEq)]
pub struct PositivePairSet {
    pub pairs: Vec<PositivePair>,
    pub delta: usize,
    pub epsilon: f64,
    /// Size of the candidate pool the threshold was taken over.
    pub pool_size: usize,
}

impl PositivePairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, u: NodeId, v: NodeId) -> bool {
        let key = (u.min(v), u.max(v));
        self.pairs
            .binary_search_by(|p| (p.u, p.v).cmp(&key))
            .is_ok()
    }
}

/// Nearest-rank quantile of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    let mut v = values.to_vec();
    let (_, nth, _) = v.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Some(*nth)
}

pub fn mine_positive_pairs(
    g: &Graph,
    pis: &PiStore,
    cfg: &MiningConfig,
) -> Result<PositivePairSet> {
    cfg.validate()?;
    let n = g.num_nodes();
    if pis.num_nodes() == 0 || pis.vec_len == 0 {
        return Err(Error::Data("empty PI store".into()));
    }
    if pis.num_nodes() != n {
        return Err(Error::Data(format!(
            "PI store covers {} nodes, graph has {n}",
            pis.num_nodes()
        )));
    }
    let delta = cfg.delta;
    let rows: Vec<Vec<PositivePair>> = (0..n)
        .into_par_iter()
        .map_init(
            || (BfsScratch::new(n), vec![false; n]),
            |(scratch, near), u| {
                scratch.run(g, u, Some(delta - 1));
                for &w in scratch.visited() {
                    near[w] = true;
                }
                let pair = |v: NodeId, d: f64| PositivePair {
                    u: u.min(v),
                    v: u.max(v),
                    distance: d,
                    hop_lower_bound: delta,
                };
                let out = match cfg.strategy {
                    CandidateStrategy::Exhaustive => (u + 1..n)
                        .filter(|&v| !near[v])
                        .map(|v| pair(v, pis.distance(u, v)))
                        .collect(),
                    CandidateStrategy::Sampled(k) => {
                        let mut all: Vec<(f64, NodeId)> = (0..n)
                            .filter(|&v| v != u)
                            .map(|v| (pis.distance(u, v), v))
                            .collect();
                        let k = k.min(all.len());
                        if k < all.len() {
                            all.select_nth_unstable_by(k, |a, b| {
                                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
                            });
                            all.truncate(k);
                        }
                        all.into_iter()
                            .filter(|&(_, v)| !near[v])
                            .map(|(d, v)| pair(v, d))
                            .collect()
                    }
                };
                for &w in scratch.visited() {
                    near[w] = false;
                }
                out
            },
        )
        .collect();
    let mut pool: Vec<PositivePair> = rows.into_iter().flatten().collect();
    pool.sort_by_key(|p| (p.u, p.v));
    pool.dedup_by(|a, b| (a.u, a.v) == (b.u, b.v));
    let pool_size = pool.len();

    let epsilon = match cfg.epsilon {
        EpsilonMode::Absolute(e) => e,
        EpsilonMode::Quantile(q) => {
            let ds: Vec<f64> = pool.iter().map(|p| p.distance).collect();
            quantile(&ds, q).unwrap_or(0.0)
        }
    };
    let mut accepted: Vec<PositivePair> =
        pool.into_iter().filter(|p| p.distance <= epsilon).collect();
    accepted.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then((a.u, a.v).cmp(&(b.u, b.v)))
    });
    let mut load = vec![0usize; n];
    let mut pairs = Vec::new();
    for p in accepted {
        if load[p.u] < cfg.max_pairs_per_node && load[p.v] < cfg.max_pairs_per_node {
            load[p.u] += 1;
            load[p.v] += 1;
            pairs.push(p);
        }
    }
    pairs.sort_by_key(|p| (p.u, p.v));
    Ok(PositivePairSet {
        pairs,
        delta,
        epsilon,
        pool_size,
    })
}

/// Writes `# key value` header lines, then `u<TAB>v<TAB>distance<TAB>hop_lb`.
pub fn write_pairs(path: &Path, set: &PositivePairSet, header: &[(String, String)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        for (k, v) in header {
            writeln!(w, "# {k} {v}")?;
        }
        writeln!(w, "# delta {}", set.delta)?;
        writeln!(w, "# epsilon {}", set.epsilon)?;
        writeln!(w, "# pool_size {}", set.pool_size)?;
        for p in &set.pairs {
            writeln!(w, "{}\t{}\t{}\t{}", p.u, p.v, p.distance, p.hop_lower_bound)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Reads a pairs file; returns the set and the header key-value lines.
pub fn read_pairs(path: &Path) -> Result<(PositivePairSet, BTreeMap<String, String>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = BTreeMap::new();
    let mut pairs = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            header.insert(k.to_string(), v.to_string());
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f = fields(&line);
        if f.len() != 4 {
            return Err(Error::Data(format!(
                "{}:{}: expected 4 fields",
                path.display(),
                lineno + 1
            )));
        }
        pairs.push(PositivePair {
            u: parse_field(f[0], path, lineno)?,
            v: parse_field(f[1], path, lineno)?,
            distance: parse_field(f[2], path, lineno)?,
            hop_lower_bound: parse_field(f[3], path, lineno)?,
        });
    }
    let get = |k: &str| -> Result<String> {
        header
            .get(k)
            .cloned()
            .ok_or_else(|| Error::Data(format!("{}: missing `{k}` header", path.display())))
    };
    let set = PositivePairSet {
        pairs,
        delta: parse_field(&get("delta")?, path, 0)?,
        epsilon: parse_field(&get("epsilon")?, path, 0)?,
        pool_size: parse_field(&get("pool_size")?, path, 0)?,
    };
    Ok((set, header))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanStat {
    pub sum: f64,
    pub count: usize,
}

impl MeanStat {
    fn add(&mut self, x: f64) {
        self.sum += x;
        self.count += 1;
    }

    fn merge(&mut self, other: &MeanStat) {
        self.sum += other.sum;
        self.count += other.count;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Hop strata reported for same-label pairs.
pub const REPORT_HOPS: [usize; 4] = [3, 4, 5, 6];
/// Same-label pairs at least this far apart form the "far positive" stratum.
pub const FAR_HOP: usize = 5;

/// Statistics over sampled non-adjacent node pairs.
///
/// * `hops`: hop distance of connected same-label pairs
/// * `topo`: image distance over every sampled pair
/// * `positive_by_hop`: same-label pairs at exactly 3, 4, 5, 6 hops
/// * `positive_far`: same-label pairs at `FAR_HOP` hops or more
/// * `negative`: different-label pairs (including unreachable ones)
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BiasReport {
    pub hops: MeanStat,
    pub topo: MeanStat,
    pub positive_by_hop: BTreeMap<usize, MeanStat>,
    pub positive_far: MeanStat,
    pub negative: MeanStat,
    pub sampled_pairs: usize,
    pub unreachable_pairs: usize,
    pub exact: bool,
}

impl BiasReport {
    fn merge(&mut self, other: &BiasReport) {
        self.hops.merge(&other.hops);
        self.topo.merge(&other.topo);
        for (h, s) in &other.positive_by_hop {
            self.positive_by_hop.entry(*h).or_default().merge(s);
        }
        self.positive_far.merge(&other.positive_far);
        self.negative.merge(&other.negative);
        self.sampled_pairs += other.sampled_pairs;
        self.unreachable_pairs += other.unreachable_pairs;
    }

    pub fn avg_hops(&self) -> Option<f64> {
        self.hops.mean()
    }

    pub fn avg_topo_distance(&self) -> Option<f64> {
        self.topo.mean()
    }

    pub fn per_hop_positive_distance(&self, hop: usize) -> Option<f64> {
        self.positive_by_hop.get(&hop).and_then(MeanStat::mean)
    }

    pub fn negative_nonneighbor_distance(&self) -> Option<f64> {
        self.negative.mean()
    }

    pub fn unreachable_fraction(&self) -> f64 {
        if self.sampled_pairs == 0 {
            0.0
        } else {
            self.unreachable_pairs as f64 / self.sampled_pairs as f64
        }
    }

    /// Machine-readable `key value` lines; absent strata print `NA`.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let fmt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        let mut out = vec![
            ("avg_hops".to_string(), fmt(self.avg_hops())),
            (
                "avg_topo_distance".to_string(),
                fmt(self.avg_topo_distance()),
            ),
        ];
        for h in REPORT_HOPS {
            out.push((
                format!("positive_distance_hop{h}"),
                fmt(self.per_hop_positive_distance(h)),
            ));
        }
        out.push((
            format!("positive_distance_hop{FAR_HOP}plus"),
            fmt(self.positive_far.mean()),
        ));
        out.push((
            "negative_nonneighbor_distance".to_string(),
            fmt(self.negative_nonneighbor_distance()),
        ));
        out.push(("sampled_pairs".to_string(), self.sampled_pairs.to_string()));
        out.push(("positive_pairs".to_string(), self.hops.count.to_string()));
        out.push((
            "negative_pairs".to_string(),
            self.negative.count.to_string(),
        ));
        out.push((
            "unreachable_fraction".to_string(),
            format!("{:.6}", self.unreachable_fraction()),
        ));
        out.push(("exact".to_string(), self.exact.to_string()));
        out
    }
}

fn accumulate(report: &mut BiasReport, same_label: bool, hop: Option<usize>, d: f64) {
    report.sampled_pairs += 1;
    report.topo.add(d);
    match hop {
        None => report.unreachable_pairs += 1,
        Some(h) if same_label => {
            report.hops.add(h as f64);
            if REPORT_HOPS.contains(&h) {
                report.positive_by_hop.entry(h).or_default().add(d);
            }
            if h >= FAR_HOP {
                report.positive_far.add(d);
            }
        }
        Some(_) => {}
    }
    if !same_label {
        report.negative.add(d);
    }
}

/// Neighbor-bias statistics over non-adjacent pairs: exact when the number
/// of node pairs fits in `sample_budget`, otherwise over `sample_budget`
/// uniformly drawn pairs (seeded).
pub fn neighbor_bias_report(
    g: &Graph,
    pis: &PiStore,
    sample_budget: usize,
    seed: u64,
) -> Result<BiasReport> {
    let labels = g
        .labels()
        .ok_or_else(|| Error::Data("neighbor-bias report needs labels".into()))?;
    let n = g.num_nodes();
    if pis.num_nodes() != n {
        return Err(Error::Data("PI store does not match the graph".into()));
    }
    let total_pairs = n.saturating_sub(1) * n / 2;
    let exact = total_pairs <= sample_budget;
    // sources with their target lists
    let groups: Vec<(NodeId, Vec<NodeId>)> = if exact {
        (0..n).map(|u| (u, (u + 1..n).collect())).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut targets: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for _ in 0..sample_budget {
            let u = rng.gen_range(0..n);
            let mut v = rng.gen_range(0..n - 1);
            if v >= u {
                v += 1;
            }
            targets.entry(u).or_default().push(v);
        }
        targets.into_iter().collect()
    };
    let partials: Vec<BiasReport> = groups
        .par_iter()
        .map_init(
            || BfsScratch::new(n),
            |scratch, (u, vs)| {
                let u = *u;
                scratch.run(g, u, None);
                let mut part = BiasReport::default();
                for &v in vs {
                    if g.has_edge(u, v) {
                        continue;
                    }
                    let hop = scratch.distance(v);
                    accumulate(&mut part, labels[u] == labels[v], hop, pis.distance(u, v));
                }
                part
            },
        )
        .collect();
    let mut report = BiasReport {
        exact,
        ..BiasReport::default()
    };
    for p in &partials {
        report.merge(p);
    }
    Ok(report)
}
