//! Acceptance suite. Each criterion prints one `PASS`, `FAIL` or `SKIP`
//! line; the binary exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use topopairs::curvature::{ricci_curvature, EdgeValues};
use topopairs::gcn::{normalize_adjacency, JointObjective, ModelParams, SslForm, SslItem};
use topopairs::graph::{ego_net, Graph};
use topopairs::mining::{mine_positive_pairs, neighbor_bias_report, EpsilonMode, MiningConfig};
use topopairs::persistence::{
    lift_values, node_diagrams, persistence_diagram, sublevel_filtration, PersistenceDiagram,
    RawFunction,
};
use topopairs::pipeline::{extract, FiltrationKind};
use topopairs::synth::{generate_planted_graph, MotifGroup, MotifKind, PlantedParams};
use topopairs::train::{joint_train, standard_split, TrainConfig};
use topopairs::vectorize::{persistence_image, NormalizationSpec, PIConfig};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

// ---------------------------------------------------------------------------
// 1. persistence against a brute-force Betti sweep

/// Components by depth-first search on the threshold subcomplex.
fn components(n: usize, alive: &[bool], edges: &[(usize, usize)]) -> usize {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if !alive[s] || seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    count
}

fn alive_at(points: &[(f64, f64)], t: f64) -> usize {
    points.iter().filter(|&&(b, d)| b <= t && t < d).count()
}

/// Betti numbers of the sublevel complex at every critical value and just
/// below the first one, compared with the counts read off the diagram.
fn betti_mismatches(
    node_values: &[f64],
    edges: &[(usize, usize)],
    edge_values: &[f64],
    pd: &PersistenceDiagram,
) -> usize {
    let n = node_values.len();
    let mut thresholds: Vec<f64> = node_values.iter().chain(edge_values).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    if let Some(&first) = thresholds.first() {
        thresholds.insert(0, first - 1.0);
    }
    let mut bad = 0;
    for &t in &thresholds {
        let alive: Vec<bool> = node_values.iter().map(|&x| x <= t).collect();
        let sub: Vec<(usize, usize)> = edges
            .iter()
            .zip(edge_values)
            .filter(|&(_, &x)| x <= t)
            .map(|(&e, _)| e)
            .collect();
        let v = alive.iter().filter(|&&a| a).count();
        let c = components(n, &alive, &sub);
        let b1 = sub.len() + c - v;
        if alive_at(&pd.h0, t) != c || alive_at(&pd.h1, t) != b1 {
            bad += 1;
        }
    }
    bad
}

fn criterion_persistence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut nets, mut bad) = (0usize, 0usize);
    while nets < 240 {
        let n = rng.gen_range(6..25);
        let p = rng.gen_range(0.1..0.5);
        let g = random_graph(&mut rng, n, p);
        let v = rng.gen_range(0..n);
        let ego = ego_net(&g, v, rng.gen_range(1..=2)).unwrap();
        if ego.num_nodes() > 12 {
            continue;
        }
        nets += 1;
        let local = ego.local_edge_ids();
        // integer values half the time so ties get exercised
        let draw = |rng: &mut ChaCha8Rng| {
            if nets % 2 == 0 {
                rng.gen_range(0..4) as f64
            } else {
                rng.gen_range(-1.0..1.0)
            }
        };
        let (node_values, edge_values, raw_node, raw_edge);
        if nets % 4 < 2 {
            raw_node = (0..n).map(|_| draw(&mut rng)).collect::<Vec<f64>>();
            node_values = ego
                .members
                .iter()
                .map(|&m| raw_node[m])
                .collect::<Vec<f64>>();
            edge_values = local
                .iter()
                .map(|&(a, b)| node_values[a].max(node_values[b]))
                .collect::<Vec<f64>>();
            let fa = lift_values(&ego, RawFunction::Node(&raw_node)).unwrap();
            let pd = persistence_diagram(&sublevel_filtration(&ego, &fa).unwrap());
            bad += betti_mismatches(&node_values, &local, &edge_values, &pd);
        } else {
            let all: Vec<(usize, usize)> = g.edges().collect();
            let vals: Vec<f64> = all.iter().map(|_| draw(&mut rng)).collect();
            raw_edge = EdgeValues::new(all.clone(), vals.clone()).unwrap();
            let lookup: BTreeMap<(usize, usize), f64> = all.into_iter().zip(vals).collect();
            edge_values = ego
                .local_edges
                .iter()
                .map(|e| lookup[e])
                .collect::<Vec<f64>>();
            let floor = edge_values.iter().copied().fold(f64::INFINITY, f64::min);
            let floor = if floor.is_finite() { floor } else { 0.0 };
            node_values = (0..ego.num_nodes())
                .map(|i| {
                    local
                        .iter()
                        .zip(&edge_values)
                        .filter(|(&(a, b), _)| a == i || b == i)
                        .map(|(_, &x)| x)
                        .fold(f64::INFINITY, f64::min)
                })
                .map(|x| if x.is_finite() { x } else { floor })
                .collect::<Vec<f64>>();
            let fa = lift_values(&ego, RawFunction::Edge(&raw_edge)).unwrap();
            let pd = persistence_diagram(&sublevel_filtration(&ego, &fa).unwrap());
            bad += betti_mismatches(&node_values, &local, &edge_values, &pd);
        }
    }
    check(
        bad == 0,
        format!("{nets} ego-nets, {bad} threshold mismatches"),
    )
}

// ---------------------------------------------------------------------------
// 2. curvature against Floyd-Warshall plus integer cycle canceling

#[allow(clippy::needless_range_loop)]
fn floyd_warshall(g: &Graph) -> Vec<Vec<i64>> {
    let n = g.num_nodes();
    let inf = i64::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for u in 0..n {
        d[u][u] = 0;
        for &w in g.neighbors(u) {
            d[u][w] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Integer masses of the lazy walk measure scaled by `scale`; `quarter` is
/// the laziness in units of 1/4.
fn scaled_measure(g: &Graph, x: usize, quarter: i64, scale: i64) -> Vec<(usize, i64)> {
    let deg = g.degree(x) as i64;
    let mut m = vec![(x, quarter * scale / 4)];
    for &w in g.neighbors(x) {
        m.push((w, (4 - quarter) * scale / (4 * deg)));
    }
    m
}

/// Minimum transport cost between integer supplies and demands: northwest
/// corner start, then cancel negative residual cycles found by
/// Bellman-Ford until none remain.
fn min_cost_transport(supply: &[i64], demand: &[i64], cost: &[Vec<i64>]) -> i64 {
    let (s, t) = (supply.len(), demand.len());
    let mut flow = vec![vec![0i64; t]; s];
    let (mut i, mut j) = (0, 0);
    let (mut left, mut need) = (supply.to_vec(), demand.to_vec());
    while i < s && j < t {
        let f = left[i].min(need[j]);
        flow[i][j] += f;
        left[i] -= f;
        need[j] -= f;
        if left[i] == 0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    let nodes = s + t;
    loop {
        // residual arcs: source i -> sink s+j always, sink s+j -> source i when flow > 0
        let mut arcs: Vec<(usize, usize, i64)> = Vec::new();
        for i in 0..s {
            for j in 0..t {
                arcs.push((i, s + j, cost[i][j]));
                if flow[i][j] > 0 {
                    arcs.push((s + j, i, -cost[i][j]));
                }
            }
        }
        let mut dist = vec![0i64; nodes];
        let mut pred = vec![usize::MAX; nodes];
        let mut last = None;
        for _ in 0..nodes {
            last = None;
            for (k, &(a, b, c)) in arcs.iter().enumerate() {
                if dist[a] + c < dist[b] {
                    dist[b] = dist[a] + c;
                    pred[b] = k;
                    last = Some(b);
                }
            }
            if last.is_none() {
                break;
            }
        }
        let Some(mut x) = last else {
            break;
        };
        for _ in 0..nodes {
            x = arcs[pred[x]].0;
        }
        let mut cycle = Vec::new();
        let start = x;
        loop {
            let k = pred[x];
            cycle.push(k);
            x = arcs[k].0;
            if x == start {
                break;
            }
        }
        let bottleneck = cycle
            .iter()
            .filter(|&&k| arcs[k].0 >= s)
            .map(|&k| flow[arcs[k].1][arcs[k].0 - s])
            .min()
            .unwrap();
        for &k in &cycle {
            let (a, b, _) = arcs[k];
            if a < s {
                flow[a][b - s] += bottleneck;
            } else {
                flow[b][a - s] -= bottleneck;
            }
        }
    }
    (0..s)
        .flat_map(|i| (0..t).map(move |j| (i, j)))
        .map(|(i, j)| flow[i][j] * cost[i][j])
        .sum()
}

fn oracle_kappa(g: &Graph, dist: &[Vec<i64>], u: usize, v: usize, quarter: i64) -> f64 {
    let scale = 4 * (g.degree(u) * g.degree(v)) as i64;
    let a = scaled_measure(g, u, quarter, scale);
    let b = scaled_measure(g, v, quarter, scale);
    let cost: Vec<Vec<i64>> = a
        .iter()
        .map(|&(x, _)| b.iter().map(|&(y, _)| dist[x][y]).collect())
        .collect();
    let supply: Vec<i64> = a.iter().map(|p| p.1).collect();
    let demand: Vec<i64> = b.iter().map(|p| p.1).collect();
    1.0 - min_cost_transport(&supply, &demand, &cost) as f64 / scale as f64
}

fn criterion_curvature() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut edges, mut worst) = (0usize, 0.0f64);
    while edges < 600 {
        let n = rng.gen_range(2..=10);
        let p = rng.gen_range(0.2..0.8);
        let g = random_graph(&mut rng, n, p);
        let dist = floyd_warshall(&g);
        let quarter = rng.gen_range(0..4);
        let alpha = quarter as f64 / 4.0;
        for (u, v) in g.edges() {
            let got = ricci_curvature(&g, u, v, alpha).unwrap().kappa;
            worst = worst.max((got - oracle_kappa(&g, &dist, u, v, quarter)).abs());
            edges += 1;
        }
    }
    let k = |n: usize, e: &[(usize, usize)], u: usize, v: usize| {
        ricci_curvature(&Graph::from_edges(n, e).unwrap(), u, v, 0.5)
            .unwrap()
            .kappa
    };
    let closed = [
        (k(2, &[(0, 1)], 0, 1), 1.0),
        (k(3, &[(0, 1), (1, 2), (0, 2)], 0, 1), 0.75),
        (k(3, &[(0, 1), (1, 2)], 0, 1), 0.5),
    ];
    let closed_ok = closed.iter().all(|&(got, want)| got == want);
    check(
        worst <= 1e-9 && closed_ok,
        format!(
            "{edges} edges, max |dk| {worst:.1e}; edge/K3/P3 = {}/{}/{}",
            closed[0].0, closed[1].0, closed[2].0
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. persistence images

/// Composite Simpson integral of the weighted Gaussian over every pixel,
/// `sub` (even) intervals per pixel side.
fn quadrature_image(points: &[(f64, f64)], sigma: f64, grid: usize, sub: usize) -> Vec<f64> {
    let cell = 1.0 / grid as f64;
    let h = cell / sub as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    let weight = |k: usize| match k {
        0 => 1.0,
        k if k == sub => 1.0,
        k if k % 2 == 1 => 4.0,
        _ => 2.0,
    };
    let mut out = vec![0.0; grid * grid];
    for &(b, p) in points {
        for i in 0..grid {
            for j in 0..grid {
                let mut acc = 0.0;
                for a in 0..=sub {
                    let x = i as f64 * cell + a as f64 * h;
                    let gx = weight(a) * (-(x - b) * (x - b) / (2.0 * sigma * sigma)).exp();
                    for c in 0..=sub {
                        let y = j as f64 * cell + c as f64 * h;
                        acc += gx * weight(c) * (-(y - p) * (y - p) / (2.0 * sigma * sigma)).exp();
                    }
                }
                out[i * grid + j] += p * norm * acc * (h / 3.0) * (h / 3.0);
            }
        }
    }
    out
}

fn random_diagram(rng: &mut impl Rng, points: usize) -> PersistenceDiagram {
    let mut pt = || {
        let b: f64 = rng.gen_range(0.0..0.8);
        (b, b + rng.gen_range(0.05..0.2))
    };
    PersistenceDiagram {
        h0: (0..points).map(|_| pt()).collect(),
        h1: (0..points / 2).map(|_| pt()).collect(),
        zero_persistence: 0,
    }
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn criterion_images() -> Outcome {
    let unit = NormalizationSpec::new(0.0, 1.0).unwrap();
    // single points against quadrature
    let cases = [
        (0.5, 1.0, 0.1, 0.1),
        (0.2, 0.35, 0.1, 0.05),
        (0.05, 0.9, 0.2, 0.1),
    ];
    let mut worst = 0.0f64;
    for &(b, d, res, sigma) in &cases {
        let cfg = PIConfig::with_sigma(res, sigma).unwrap();
        let pd = PersistenceDiagram {
            h0: vec![(b, d)],
            ..PersistenceDiagram::default()
        };
        let img = persistence_image(&pd, &unit, &cfg);
        let n = cfg.grid();
        let want = quadrature_image(&[(b, d - b)], sigma, n, 200);
        let err = img.pixels[..n * n]
            .iter()
            .zip(&want)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        if img.pixels[n * n..].iter().any(|&x| x != 0.0) {
            worst = f64::INFINITY;
        }
    }
    // order of points does not matter
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = PIConfig::new(0.1).unwrap();
    let mut permuted_equal = true;
    for _ in 0..50 {
        let pd = random_diagram(&mut rng, 8);
        let mut shuffled = pd.clone();
        shuffled.h0.shuffle(&mut rng);
        shuffled.h1.shuffle(&mut rng);
        permuted_equal &=
            persistence_image(&pd, &unit, &cfg) == persistence_image(&shuffled, &unit, &cfg);
    }
    // image change grows with the perturbation size
    let etas = [0.01, 0.02, 0.04];
    let mut means = [0.0; 3];
    let trials = 200;
    for _ in 0..trials {
        let pd = random_diagram(&mut rng, 6);
        let base = persistence_image(&pd, &unit, &cfg);
        let dirs: Vec<(f64, f64)> = pd
            .h0
            .iter()
            .chain(&pd.h1)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        for (k, &eta) in etas.iter().enumerate() {
            let mut moved = pd.clone();
            for (p, &(db, dd)) in moved.h0.iter_mut().chain(moved.h1.iter_mut()).zip(&dirs) {
                p.0 += eta * db;
                p.1 += eta * dd;
            }
            means[k] +=
                l2(&persistence_image(&moved, &unit, &cfg).pixels, &base.pixels) / trials as f64;
        }
    }
    let monotone = means[0] < means[1] && means[1] < means[2];
    check(
        worst <= 1e-6 && permuted_equal && monotone,
        format!(
            "max pixel error {worst:.1e}, permutation {}, mean shift {:.4}/{:.4}/{:.4}",
            if permuted_equal { "exact" } else { "differs" },
            means[0],
            means[1],
            means[2]
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. joint-loss gradients

fn criterion_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let step = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = 10;
        let g = random_graph(&mut rng, n, 0.3);
        let prop = normalize_adjacency(&g);
        let x = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0));
        let ax = prop.apply(&x);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let train: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
        let items: Vec<SslItem> = (0..3)
            .map(|_| {
                let anchor = rng.gen_range(0..n);
                let positive = (anchor + rng.gen_range(1..n)) % n;
                SslItem {
                    anchor,
                    positive,
                    negatives: (0..3)
                        .map(|_| rng.gen_range(0..n))
                        .filter(|&w| w != anchor)
                        .collect(),
                    weight: rng.gen_range(0.5..1.5),
                }
            })
            .collect();
        let params = ModelParams::init(4, 6, 3, &mut rng);
        let obj = JointObjective {
            prop: &prop,
            ax: &ax,
            labels: &labels,
            train: &train,
            items: &items,
            lambda: rng.gen_range(0.05..1.0),
            tau: 0.5,
            form: SslForm::InfoNce,
            weight_decay: 5e-4,
        };
        let (_, grads) = obj.evaluate(&params, None).unwrap();
        let loss = |p: &ModelParams| obj.evaluate(p, None).unwrap().0.total;
        let (mut diff, mut scale_a, mut scale_n) = (0.0, 0.0, 0.0);
        for which in 0..2 {
            let analytic = if which == 0 { &grads.w1 } else { &grads.w2 };
            for idx in ndarray::indices(analytic.dim()) {
                let (mut plus, mut minus) = (params.clone(), params.clone());
                let (p, m) = if which == 0 {
                    (&mut plus.w1, &mut minus.w1)
                } else {
                    (&mut plus.w2, &mut minus.w2)
                };
                p[idx] += step;
                m[idx] -= step;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * step);
                diff += (analytic[idx] - numeric).powi(2);
                scale_a += analytic[idx].powi(2);
                scale_n += numeric * numeric;
            }
        }
        worst = worst.max(diff.sqrt() / f64::max(scale_a, scale_n).sqrt().max(1e-12));
    }
    check(
        worst <= 1e-4,
        format!("20 instances, max relative error {worst:.1e}"),
    )
}

// ---------------------------------------------------------------------------
// 5. planted motif recovery and training benefit

fn planted_params() -> PlantedParams {
    PlantedParams {
        motifs: vec![
            MotifGroup {
                kind: MotifKind::Star,
                size: 5,
                count: 10,
            },
            MotifGroup {
                kind: MotifKind::Clique,
                size: 5,
                count: 10,
            },
        ],
        path_length: 6,
        min_hop: 5,
        background_nodes: 200,
        communities: 3,
        p_in: 0.05,
        p_out: 0.003,
        feature_dim: 64,
        feature_signal: 1.0,
        motif_feature_signal: 0.0,
    }
}

/// One-sided sign test: probability of at least `wins` successes in `n`
/// fair coin flips.
fn sign_test(wins: usize, n: usize) -> f64 {
    let mut choose = 1.0f64;
    let mut tail = 0.0;
    for k in 0..=n {
        if k >= wins {
            tail += choose;
        }
        choose = choose * (n - k) as f64 / (k + 1) as f64;
    }
    tail / 2f64.powi(n as i32)
}

fn criterion_planted() -> Outcome {
    let seeds = 20u64;
    let (mut found, mut planted, mut wins, mut losses, mut gain) = (0, 0, 0, 0, 0.0);
    let mining = MiningConfig {
        epsilon: EpsilonMode::Quantile(0.05),
        max_pairs_per_node: 100,
        ..MiningConfig::default()
    };
    for seed in 0..seeds {
        let pg = generate_planted_graph(seed, &planted_params()).unwrap();
        let g = &pg.graph;
        let store = extract(
            g,
            FiltrationKind::Ricci,
            2,
            0.5,
            &PIConfig::new(0.1).unwrap(),
            None,
        )
        .unwrap();
        let pairs = mine_positive_pairs(g, &store, &mining).unwrap();
        found += pg
            .planted
            .iter()
            .filter(|&&(u, v)| pairs.contains(u, v))
            .count();
        planted += pg.planted.len();

        let labels = g.labels().unwrap().to_vec();
        let split = standard_split(&labels, 5, 500, 1000, seed);
        let x = g.features().unwrap();
        let base = TrainConfig {
            lambda: 0.0,
            seed,
            ..TrainConfig::default()
        };
        let ours = TrainConfig {
            lambda: 0.1,
            ..base.clone()
        };
        let (_, a) = joint_train(g, x, &labels, &split, None, &base).unwrap();
        let (_, b) = joint_train(g, x, &labels, &split, Some(&pairs), &ours).unwrap();
        let d = b.test_acc - a.test_acc;
        gain += d / seeds as f64;
        if d > 0.0 {
            wins += 1;
        } else if d < 0.0 {
            losses += 1;
        }
    }
    let recall = found as f64 / planted as f64;
    let p = sign_test(wins, wins + losses);
    check(
        recall >= 0.9 && p < 0.05 && gain > 0.0,
        format!(
            "recall {recall:.3} ({found}/{planted}), wins {wins} losses {losses}, sign test p {p:.2e}, mean gain {:+.2} pts",
            100.0 * gain
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. same-label far pairs are topologically closer than different-label pairs

fn criterion_bias_ordering() -> Outcome {
    let mut rows = Vec::new();
    let mut ok = true;
    for seed in 0..3 {
        let pg = generate_planted_graph(100 + seed, &planted_params()).unwrap();
        let g = &pg.graph;
        let raw = topopairs::curvature::curvature_all_edges(g, 0.5).unwrap();
        let diagrams = node_diagrams(g, RawFunction::Edge(&raw), 2).unwrap();
        let store = topopairs::pipeline::pi_store(&diagrams, &PIConfig::new(0.1).unwrap()).unwrap();
        let report = neighbor_bias_report(g, &store, usize::MAX, seed).unwrap();
        let same = report.positive_far.mean().unwrap_or(f64::NAN);
        let diff = report.negative_nonneighbor_distance().unwrap_or(f64::NAN);
        ok &= same < diff;
        rows.push(format!("{same:.4} < {diff:.4}"));
    }
    check(
        ok,
        format!("same-label hop>=5 vs different-label: {}", rows.join(", ")),
    )
}

// ---------------------------------------------------------------------------
// 7. optional citation benchmark

fn criterion_cora() -> Outcome {
    use topopairs::commands::{self, Context};
    use topopairs::config::RunConfig;

    let Some(dir) = std::env::var_os("TOPOPAIRS_CORA_DIR") else {
        return Outcome::Skip(
            "set TOPOPAIRS_CORA_DIR to a directory with edges.tsv, labels.tsv and features.bin or features.tsv"
                .into(),
        );
    };
    let dir = std::path::PathBuf::from(dir);
    let features = ["features.bin", "features.tsv"]
        .map(|f| dir.join(f))
        .into_iter()
        .find(|p| p.exists());
    let out = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let setup = |lambda: &str, sub: &str| {
        let mut cfg = RunConfig::default();
        for (k, v) in [
            ("name", "cora"),
            ("edges", dir.join("edges.tsv").to_str().unwrap()),
            ("labels", dir.join("labels.tsv").to_str().unwrap()),
            ("features", features.as_deref().map_or("none", |p| p.to_str().unwrap())),
            ("output", out.path().join(sub).to_str().unwrap()),
            ("lambda", lambda),
        ] {
            cfg.set(k, v).unwrap();
        }
        cfg
    };
    let ctx = Context {
        cache_dir: Some(out.path().join("cache")),
    };
    let run = || -> topopairs::Result<(f64, f64, f64)> {
        let base = setup("0", "base");
        let h: f64 = commands::stats(&base, &ctx)?
            .iter()
            .find(|(k, _)| k == "homophily")
            .and_then(|(_, v)| v.parse().ok())
            .unwrap_or(f64::NAN);
        let a = commands::train(&base, &ctx)?;
        let ours = setup("0.1", "ours");
        commands::extract(&ours, &ctx)?;
        commands::mine(&ours, &ctx)?;
        let b = commands::train(&ours, &ctx)?;
        Ok((h, a.test_acc, b.test_acc))
    };
    match run() {
        Err(e) => Outcome::Fail(format!("pipeline error: {e}")),
        Ok((h, base, ours)) => {
            let elapsed = start.elapsed();
            check(
                (h - 0.8138).abs() <= 0.005
                    && (100.0 * base - 80.6).abs() <= 1.5
                    && 100.0 * (ours - base) >= 1.0
                    && elapsed <= Duration::from_secs(15 * 60),
                format!(
                    "homophily {h:.4}, baseline {:.1}%, joint {:.1}%, {:.0?}",
                    100.0 * base,
                    100.0 * ours,
                    elapsed
                ),
            )
        }
    }
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 7] = [
        (
            "persistence matches Betti sweep",
            criterion_persistence,
            Some(Duration::from_secs(10)),
        ),
        (
            "curvature matches transport oracle",
            criterion_curvature,
            Some(Duration::from_secs(30)),
        ),
        ("persistence images", criterion_images, None),
        ("joint-loss gradient check", criterion_gradients, None),
        (
            "planted motif recovery and gain",
            criterion_planted,
            Some(Duration::from_secs(300)),
        ),
        (
            "far same-label pairs look alike",
            criterion_bias_ordering,
            None,
        ),
        ("citation benchmark", criterion_cora, None),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = budget.is_some_and(|b| elapsed > b);
        let timing = match budget {
            Some(b) => format!("{:.1}s of {}s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.1}s", elapsed.as_secs_f64()),
        };
        let (tag, detail) = match outcome {
            Outcome::Pass(d) if over => ("FAIL", format!("{d}; over time budget")),
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag} [{}] {name}: {detail} ({timing})", i + 1);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
