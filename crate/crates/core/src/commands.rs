//! File-staged commands: `stats`, `extract`, `mine`, `train`, `sweep` and
//! `report`. Every artifact records the hash of the configuration that
//! produced it and downstream stages refuse artifacts with another hash.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::{homophily_index, Graph, NodeId};
use crate::io::{labels_from_entries, read_edge_list, read_features, read_label_entries};
use crate::mining::{
    mine_positive_pairs, neighbor_bias_report, read_pairs, write_pairs, PositivePairSet,
};
use crate::persistence::PersistenceDiagram;
use crate::pipeline::{diagrams, pi_store};
use crate::train::{joint_train, standard_split, write_checkpoint, Metrics};
use crate::vectorize::PiStore;

pub const CONFIG_FILE: &str = "config.txt";
pub const STATS_FILE: &str = "stats.txt";
pub const PIS_FILE: &str = "pis.bin";
pub const PIS_META_FILE: &str = "pis.meta";
pub const DIAGRAMS_FILE: &str = "diagrams.tsv";
pub const PAIRS_FILE: &str = "pairs.tsv";
pub const METRICS_FILE: &str = "metrics.txt";
pub const CURVE_FILE: &str = "curve.csv";
pub const MODEL_FILE: &str = "model.bin";
pub const NODES_FILE: &str = "nodes.tsv";
pub const REPORT_FILE: &str = "report.md";

/// Settings that do not change results.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub cache_dir: Option<PathBuf>,
}

/// A loaded graph with the ids it had in the input files.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: Graph,
    pub original_ids: Vec<NodeId>,
    pub graph_hash: String,
    /// Covers the graph, features and labels.
    pub data_hash: String,
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let edges_path = cfg
        .edges
        .as_ref()
        .ok_or_else(|| Error::Config("no edge list given (set `edges`)".into()))?;
    let (edges, mut n) = read_edge_list(edges_path)?;
    let features = cfg.features.as_deref().map(read_features).transpose()?;
    let label_entries = cfg.labels.as_deref().map(read_label_entries).transpose()?;
    if let Some(x) = &features {
        n = n.max(x.nrows());
    }
    if let Some(e) = &label_entries {
        n = n.max(e.iter().map(|(v, _)| v + 1).max().unwrap_or(0));
    }
    let mut graph = Graph::from_edges(n, &edges)?;
    if let Some(x) = features {
        graph = graph.with_features(x)?;
    }
    if let Some(e) = label_entries {
        graph = graph.with_labels(labels_from_entries(&e, n)?)?;
    }
    let (graph, original_ids) = if cfg.lcc {
        let (g, ids) = graph.largest_component();
        if g.num_nodes() < n {
            info!("largest component keeps {} of {n} nodes", g.num_nodes());
        }
        (g, ids)
    } else {
        (graph, (0..n).collect())
    };
    let graph_hash = graph.content_hash();
    let mut h = Sha256::new();
    h.update(graph_hash.as_bytes());
    if let Some(x) = graph.features() {
        h.update((x.ncols() as u64).to_le_bytes());
        for v in x.iter() {
            h.update(v.to_le_bytes());
        }
    }
    if let Some(l) = graph.labels() {
        for &c in l {
            h.update((c as u64).to_le_bytes());
        }
    }
    let data_hash = hex::encode(h.finalize());
    Ok(Dataset {
        graph,
        original_ids,
        graph_hash,
        data_hash,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn key_values_text(header: &[(String, String)], body: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in header {
        let _ = writeln!(out, "# {k} {v}");
    }
    for (k, v) in body {
        let _ = writeln!(out, "{k}\t{v}");
    }
    out
}

/// Parses `# key value` header lines and `key<TAB>value` body lines.
pub fn read_key_values(
    path: &Path,
) -> Result<(BTreeMap<String, String>, BTreeMap<String, String>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut header = BTreeMap::new();
    let mut body = BTreeMap::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            header.insert(k.to_string(), v.to_string());
        } else if let Some((k, v)) = line.split_once('\t') {
            body.insert(k.to_string(), v.to_string());
        }
    }
    Ok((header, body))
}

fn prepare_output(cfg: &RunConfig, ds: &Dataset) -> Result<()> {
    ensure_dir(&cfg.output)?;
    write_text(&cfg.output.join(CONFIG_FILE), &cfg.to_text())?;
    if ds.original_ids.len() != ds.original_ids.last().map_or(0, |v| v + 1) {
        let mut text = String::from("# node\toriginal\n");
        for (i, v) in ds.original_ids.iter().enumerate() {
            let _ = writeln!(text, "{i}\t{v}");
        }
        write_text(&cfg.output.join(NODES_FILE), &text)?;
    }
    Ok(())
}

fn compute_store(
    cfg: &RunConfig,
    ctx: &Context,
    g: &Graph,
) -> Result<(PiStore, Vec<PersistenceDiagram>)> {
    let d = diagrams(
        g,
        cfg.filtration,
        cfg.radius,
        cfg.alpha,
        ctx.cache_dir.as_deref(),
    )?;
    let store = pi_store(&d, &cfg.pi_config()?)?;
    Ok((store, d))
}

fn stored_extract_hash(dir: &Path) -> Option<String> {
    let (header, _) = read_key_values(&dir.join(PIS_META_FILE)).ok()?;
    header.get("config_hash").cloned()
}

fn load_store(cfg: &RunConfig, ds: &Dataset) -> Result<PiStore> {
    let want = cfg.extract_hash(&ds.graph_hash);
    match stored_extract_hash(&cfg.output) {
        Some(h) if h == want => {}
        Some(h) => return Err(Error::Data(format!(
            "PI store in {} was built with config {h}, current config is {want}; rerun `extract`",
            cfg.output.display()
        ))),
        None => {
            return Err(Error::Data(format!(
                "no PI store in {}; run `extract` first",
                cfg.output.display()
            )))
        }
    }
    let store = PiStore::read(&cfg.output.join(PIS_FILE))?;
    if store.num_nodes() != ds.graph.num_nodes() {
        return Err(Error::Data(
            "PI store node count does not match the graph".into(),
        ));
    }
    Ok(store)
}

/// Homophily and neighbor-bias statistics. Uses the extracted PI store
/// when it matches the configuration and computes images otherwise.
pub fn stats(cfg: &RunConfig, ctx: &Context) -> Result<Vec<(String, String)>> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    if ds.graph.labels().is_none() {
        return Err(Error::Config("stats needs labels (set `labels`)".into()));
    }
    prepare_output(cfg, &ds)?;
    let store = match load_store(cfg, &ds) {
        Ok(s) => s,
        Err(_) => compute_store(cfg, ctx, &ds.graph)?.0,
    };
    let g = &ds.graph;
    let mut out = vec![
        ("nodes".to_string(), g.num_nodes().to_string()),
        ("edges".to_string(), g.num_edges().to_string()),
        (
            "homophily".to_string(),
            format!("{:.6}", homophily_index(g)?),
        ),
    ];
    out.extend(neighbor_bias_report(g, &store, cfg.report_budget, cfg.split_seed)?.to_key_values());
    let header = vec![
        ("config_hash".to_string(), cfg.extract_hash(&ds.graph_hash)),
        ("name".to_string(), cfg.name.clone()),
    ];
    write_text(
        &cfg.output.join(STATS_FILE),
        &key_values_text(&header, &out),
    )?;
    Ok(out)
}

/// Writes diagrams, the PI store and its metadata. Returns `false` when a
/// store with the same configuration hash already exists.
pub fn extract(cfg: &RunConfig, ctx: &Context) -> Result<bool> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    prepare_output(cfg, &ds)?;
    let hash = cfg.extract_hash(&ds.graph_hash);
    if stored_extract_hash(&cfg.output).as_deref() == Some(hash.as_str())
        && cfg.output.join(PIS_FILE).exists()
    {
        info!("PI store {hash} is up to date");
        return Ok(false);
    }
    let (store, diagrams) = compute_store(cfg, ctx, &ds.graph)?;
    let mut text = String::from("# node\tdim\tbirth\tdeath\n");
    for (v, d) in diagrams.iter().enumerate() {
        for line in d.dump().lines() {
            let _ = writeln!(text, "{v}\t{line}");
        }
    }
    write_text(&cfg.output.join(DIAGRAMS_FILE), &text)?;
    store.write(&cfg.output.join(PIS_FILE))?;
    let meta = vec![
        ("config_hash".to_string(), hash),
        ("graph_hash".to_string(), ds.graph_hash.clone()),
        ("name".to_string(), cfg.name.clone()),
    ];
    let body = vec![
        ("nodes".to_string(), store.num_nodes().to_string()),
        ("vec_len".to_string(), store.vec_len.to_string()),
        ("filtration".to_string(), cfg.filtration.to_string()),
        ("radius".to_string(), cfg.radius.to_string()),
        ("resolution".to_string(), cfg.resolution.to_string()),
        ("sigma".to_string(), store.sigma.to_string()),
    ];
    write_text(
        &cfg.output.join(PIS_META_FILE),
        &key_values_text(&meta, &body),
    )?;
    Ok(true)
}

fn pairs_header(cfg: &RunConfig, ds: &Dataset) -> Vec<(String, String)> {
    vec![
        ("config_hash".to_string(), cfg.mine_hash(&ds.graph_hash)),
        ("extract_hash".to_string(), cfg.extract_hash(&ds.graph_hash)),
        ("name".to_string(), cfg.name.clone()),
    ]
}

pub fn mine(cfg: &RunConfig, _ctx: &Context) -> Result<PositivePairSet> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    prepare_output(cfg, &ds)?;
    let store = load_store(cfg, &ds)?;
    let set = mine_positive_pairs(&ds.graph, &store, &cfg.mining)?;
    info!("mined {} pairs from a pool of {}", set.len(), set.pool_size);
    write_pairs(&cfg.output.join(PAIRS_FILE), &set, &pairs_header(cfg, &ds))?;
    Ok(set)
}

/// Node features, or one-hot identity features when none were given.
fn features_of(g: &Graph) -> Array2<f64> {
    match g.features() {
        Some(x) => x.clone(),
        None => Array2::eye(g.num_nodes()),
    }
}

fn train_with(cfg: &RunConfig, ds: &Dataset, pairs: Option<&PositivePairSet>) -> Result<Metrics> {
    let labels = ds
        .graph
        .labels()
        .ok_or_else(|| Error::Config("training needs labels (set `labels`)".into()))?;
    let split = standard_split(
        labels,
        cfg.train_per_class,
        cfg.val_size,
        cfg.test_size,
        cfg.split_seed,
    );
    let x = features_of(&ds.graph);
    let (params, metrics) = joint_train(&ds.graph, &x, labels, &split, pairs, &cfg.train)?;
    let dir = &cfg.output;
    ensure_dir(dir)?;
    let header = vec![
        (
            "config_hash".to_string(),
            cfg.train_hash(&ds.data_hash, &ds.graph_hash),
        ),
        ("name".to_string(), cfg.name.clone()),
        ("split_seed".to_string(), cfg.split_seed.to_string()),
        ("lambda".to_string(), cfg.train.lambda.to_string()),
        (
            "pairs".to_string(),
            pairs.map_or(0, PositivePairSet::len).to_string(),
        ),
    ];
    write_text(
        &dir.join(METRICS_FILE),
        &key_values_text(&header, &metrics.to_key_values()),
    )?;
    write_text(&dir.join(CURVE_FILE), &metrics.curve_csv())?;
    write_checkpoint(&dir.join(MODEL_FILE), &params)?;
    Ok(metrics)
}

/// Trains on the mined pairs (not needed when `lambda` is zero).
pub fn train(cfg: &RunConfig, _ctx: &Context) -> Result<Metrics> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    prepare_output(cfg, &ds)?;
    let pairs = if cfg.train.lambda != 0.0 {
        let path = cfg.output.join(PAIRS_FILE);
        if !path.exists() {
            return Err(Error::Data(format!(
                "no pairs file in {}; run `mine` first",
                cfg.output.display()
            )));
        }
        let (set, header) = read_pairs(&path)?;
        let want = cfg.mine_hash(&ds.graph_hash);
        if header.get("config_hash") != Some(&want) {
            return Err(Error::Data(format!(
                "pairs file was mined with config {}, current config is {want}; rerun `mine`",
                header.get("config_hash").map_or("<none>", String::as_str)
            )));
        }
        Some(set)
    } else {
        None
    };
    train_with(cfg, &ds, pairs.as_ref())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Delta,
    Lambda,
    Resolution,
    Filtration,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(SweepAxis::Delta),
            "lambda" => Ok(SweepAxis::Lambda),
            "resolution" => Ok(SweepAxis::Resolution),
            "filtration" => Ok(SweepAxis::Filtration),
            _ => Err(Error::Config(format!(
                "unknown sweep axis '{s}' (expected delta, lambda, resolution or filtration)"
            ))),
        }
    }
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::Delta => "delta",
            SweepAxis::Lambda => "lambda",
            SweepAxis::Resolution => "resolution",
            SweepAxis::Filtration => "filtration",
        }
    }

    pub fn default_values(self) -> Vec<String> {
        let v: &[&str] = match self {
            SweepAxis::Delta => &["3", "4", "5"],
            SweepAxis::Lambda => &["0.1", "0.3", "0.5", "0.7", "0.9", "1"],
            SweepAxis::Resolution => &["0.05", "0.1"],
            SweepAxis::Filtration => &["ricci", "degree"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }
}

/// One row of a sweep: the column label and the run's metrics.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub label: String,
    pub metrics: Metrics,
}

/// Trains once per axis value, reusing images and pairs across runs that
/// share them. A lambda sweep starts with a zero-weight `original` run.
/// Writes per-run metrics under `sweep-<axis>/<label>/` and a summary table
/// `sweep_<axis>.tsv` of test accuracies in percent.
pub fn sweep(
    cfg: &RunConfig,
    ctx: &Context,
    axis: SweepAxis,
    values: Option<Vec<String>>,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    prepare_output(cfg, &ds)?;
    let mut runs: Vec<(String, RunConfig)> = Vec::new();
    if axis == SweepAxis::Lambda {
        let mut base = cfg.clone();
        base.train.lambda = 0.0;
        runs.push(("original".into(), base));
    }
    for value in values.unwrap_or_else(|| axis.default_values()) {
        let mut c = cfg.clone();
        c.set(axis.key(), &value)?;
        c.validate()?;
        runs.push((value, c));
    }

    let mut stores: BTreeMap<String, PiStore> = BTreeMap::new();
    let mut pair_sets: BTreeMap<String, PositivePairSet> = BTreeMap::new();
    let mut rows = Vec::new();
    for (label, mut c) in runs {
        c.output = cfg
            .output
            .join(format!("sweep-{}", axis.key()))
            .join(&label);
        let pairs = if c.train.lambda != 0.0 {
            let eh = c.extract_hash(&ds.graph_hash);
            if !stores.contains_key(&eh) {
                let store = compute_store(&c, ctx, &ds.graph)?.0;
                stores.insert(eh.clone(), store);
            }
            let mh = c.mine_hash(&ds.graph_hash);
            if !pair_sets.contains_key(&mh) {
                let set = mine_positive_pairs(&ds.graph, &stores[&eh], &c.mining)?;
                pair_sets.insert(mh.clone(), set);
            }
            Some(&pair_sets[&mh])
        } else {
            None
        };
        info!("sweep {}={label}", axis.key());
        let metrics = train_with(&c, &ds, pairs)?;
        rows.push(SweepRow { label, metrics });
    }

    let mut table = format!(
        "# config_hash {}\n# axis {}\n",
        cfg.train_hash(&ds.data_hash, &ds.graph_hash),
        axis.key()
    );
    table.push_str("dataset");
    for r in &rows {
        let _ = write!(table, "\t{}", r.label);
    }
    let _ = write!(table, "\n{}", cfg.name);
    for r in &rows {
        let _ = write!(table, "\t{:.2}", 100.0 * r.metrics.test_acc);
    }
    table.push('\n');
    write_text(
        &cfg.output.join(format!("sweep_{}.tsv", axis.key())),
        &table,
    )?;
    Ok(rows)
}

/// Collects the statistics, metrics and sweep tables found in the output
/// directory into a markdown report.
pub fn report(cfg: &RunConfig) -> Result<String> {
    let dir = &cfg.output;
    if !dir.is_dir() {
        return Err(Error::Data(format!(
            "output directory {} does not exist",
            dir.display()
        )));
    }
    let mut out = format!("# {}\n", cfg.name);
    let mut found = false;
    for (title, file) in [("Statistics", STATS_FILE), ("Training", METRICS_FILE)] {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        found = true;
        let (header, body) = read_key_values(&path)?;
        let _ = writeln!(out, "\n## {title}\n");
        if let Some(h) = header.get("config_hash") {
            let _ = writeln!(out, "config `{h}`\n");
        }
        out.push_str("| key | value |\n|---|---|\n");
        for (k, v) in &body {
            let _ = writeln!(out, "| {k} | {v} |");
        }
    }
    let mut tables: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("sweep_") && n.ends_with(".tsv"))
        })
        .collect();
    tables.sort();
    for path in tables {
        found = true;
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let axis = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("sweep")
            .trim_start_matches("sweep_");
        let _ = writeln!(out, "\n## Sweep over {axis} (test accuracy, %)\n");
        let rows: Vec<Vec<&str>> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty())
            .map(|l| l.split('\t').collect())
            .collect();
        for (i, r) in rows.iter().enumerate() {
            let _ = writeln!(out, "| {} |", r.join(" | "));
            if i == 0 {
                let _ = writeln!(out, "|{}", "---|".repeat(r.len()));
            }
        }
    }
    if !found {
        return Err(Error::Data(format!(
            "nothing to report in {}",
            dir.display()
        )));
    }
    write_text(&dir.join(REPORT_FILE), &out)?;
    Ok(out)
}
