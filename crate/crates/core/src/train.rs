//! Full-batch joint training: task cross-entropy plus a weighted
//! contrastive term over mined pairs, optimized with Adam.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::{debug, warn};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gcn::{
    accuracy, forward_propagated, normalize_adjacency, JointObjective, ModelParams, SslForm,
    SslItem,
};
use crate::graph::{Graph, NodeId};
use crate::mining::PositivePairSet;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TGCN";
/// Minimum loss decrease that resets the early-stopping counter.
pub const LOSS_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairWeighting {
    /// Every mined pair counts once.
    Binary,
    /// Pairs weighted by `(epsilon - d) / epsilon`.
    Margin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub lambda: f64,
    pub tau: f64,
    pub epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub negatives_per_pair: usize,
    pub dropout: f64,
    pub ssl_form: SslForm,
    pub pair_weighting: PairWeighting,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_dim: 64,
            lambda: 0.1,
            tau: 0.5,
            epochs: 1000,
            patience: 200,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            negatives_per_pair: 5,
            dropout: 0.0,
            ssl_form: SslForm::InfoNce,
            pair_weighting: PairWeighting::Binary,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.hidden_dim == 0 || self.epochs == 0 || self.patience == 0 {
            return bad("hidden_dim, epochs and patience must be positive");
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return bad("lambda must be non-negative");
        }
        if self.tau.is_nan() || self.tau <= 0.0 {
            return bad("tau must be positive");
        }
        if self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
            || self.weight_decay.is_nan()
            || self.weight_decay < 0.0
        {
            return bad("learning rate must be positive and weight decay non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Disjoint train / validation / test node sets.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<NodeId>,
    pub val: Vec<NodeId>,
    pub test: Vec<NodeId>,
}

impl Split {
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::InvalidArgument("empty training mask".into()));
        }
        let mut seen = vec![false; num_nodes];
        for &v in self.train.iter().chain(&self.val).chain(&self.test) {
            if v >= num_nodes {
                return Err(Error::InvalidArgument(format!(
                    "mask node {v} out of range"
                )));
            }
            if seen[v] {
                return Err(Error::InvalidArgument(format!(
                    "node {v} appears in two masks"
                )));
            }
            seen[v] = true;
        }
        Ok(())
    }
}

/// `per_class` training nodes per class, then up to `val` and `test` nodes
/// from the shuffled remainder. Small graphs get proportionally smaller
/// validation and test sets.
pub fn standard_split(
    labels: &[usize],
    per_class: usize,
    val: usize,
    test: usize,
    seed: u64,
) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<NodeId> = (0..labels.len()).collect();
    order.shuffle(&mut rng);
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut taken = vec![0usize; classes];
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for v in order {
        if taken[labels[v]] < per_class {
            taken[labels[v]] += 1;
            train.push(v);
        } else {
            rest.push(v);
        }
    }
    let n_val = val.min(rest.len() / 3);
    let n_test = test.min(rest.len() - n_val);
    let test_nodes = rest[n_val..n_val + n_test].to_vec();
    rest.truncate(n_val);
    train.sort_unstable();
    rest.sort_unstable();
    let mut test_nodes = test_nodes;
    test_nodes.sort_unstable();
    Split {
        train,
        val: rest,
        test: test_nodes,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task_loss: f64,
    pub ssl_loss: f64,
    pub total_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub curve: Vec<EpochRecord>,
}

struct Adam {
    m: [Array2<f64>; 2],
    v: [Array2<f64>; 2],
    step: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &ModelParams, lr: f64) -> Self {
        let z = |a: &Array2<f64>| Array2::zeros(a.dim());
        Adam {
            m: [z(&params.w1), z(&params.w2)],
            v: [z(&params.w1), z(&params.w2)],
            step: 0,
            lr,
        }
    }

    fn update(&mut self, params: &mut ModelParams, grads: [&Array2<f64>; 2]) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        let targets = [&mut params.w1, &mut params.w2];
        for (k, (w, g)) in targets.into_iter().zip(grads).enumerate() {
            ndarray::Zip::from(w)
                .and(&mut self.m[k])
                .and(&mut self.v[k])
                .and(g)
                .for_each(|w, m, v, &g| {
                    *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                    *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                    *w -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
                });
        }
    }
}

/// Per-pair contrastive items with freshly drawn negatives: uniform nodes,
/// with replacement, other than the pair and the anchor's neighbors.
pub fn sample_ssl_items(
    g: &Graph,
    pairs: &PositivePairSet,
    negatives: usize,
    weighting: PairWeighting,
    rng: &mut impl Rng,
) -> Vec<SslItem> {
    let n = g.num_nodes();
    pairs
        .pairs
        .iter()
        .map(|p| {
            let excluded = |w: NodeId| w == p.u || w == p.v || g.has_edge(p.u, w);
            let available = n.saturating_sub(2 + g.degree(p.u) - usize::from(g.has_edge(p.u, p.v)));
            let want = if available == 0 { 0 } else { negatives };
            let mut negs = Vec::with_capacity(want);
            while negs.len() < want {
                let w = rng.gen_range(0..n);
                if !excluded(w) {
                    negs.push(w);
                }
            }
            let weight = match weighting {
                PairWeighting::Binary => 1.0,
                PairWeighting::Margin if pairs.epsilon > 0.0 => {
                    ((pairs.epsilon - p.distance) / pairs.epsilon).max(0.0)
                }
                PairWeighting::Margin => 1.0,
            };
            SslItem {
                anchor: p.u,
                positive: p.v,
                negatives: negs,
                weight,
            }
        })
        .collect()
}

/// Trains from a fresh Glorot initialization and returns the parameters of
/// the epoch with the best validation accuracy.
pub fn joint_train(
    g: &Graph,
    features: &Array2<f64>,
    labels: &[usize],
    split: &Split,
    pairs: Option<&PositivePairSet>,
    cfg: &TrainConfig,
) -> Result<(ModelParams, Metrics)> {
    cfg.validate()?;
    let n = g.num_nodes();
    split.validate(n)?;
    if features.nrows() != n || labels.len() != n {
        return Err(Error::InvalidArgument(
            "features or labels do not match the graph".into(),
        ));
    }
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    let use_ssl = cfg.lambda != 0.0;
    let pairs = pairs.filter(|p| !p.is_empty());
    if use_ssl && pairs.is_none() {
        warn!("no positive pairs supplied; the contrastive term is zero");
    }

    let prop = normalize_adjacency(g);
    let ax = prop.apply(features);
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(features.ncols(), cfg.hidden_dim, classes, &mut init_rng);
    let mut neg_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0001);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0002);
    let mut adam = Adam::new(&params, cfg.learning_rate);

    let mut best_params = params.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;
    let mut curve = Vec::new();
    let no_items: Vec<SslItem> = Vec::new();

    for epoch in 0..cfg.epochs {
        let items = match (use_ssl, pairs) {
            (true, Some(p)) => sample_ssl_items(
                g,
                p,
                cfg.negatives_per_pair,
                cfg.pair_weighting,
                &mut neg_rng,
            ),
            _ => Vec::new(),
        };
        let mask = (cfg.dropout > 0.0).then(|| {
            let keep = 1.0 - cfg.dropout;
            Array2::from_shape_simple_fn((n, cfg.hidden_dim), || {
                if drop_rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
        });
        let objective = JointObjective {
            prop: &prop,
            ax: &ax,
            labels,
            train: &split.train,
            items: if use_ssl { &items } else { &no_items },
            lambda: cfg.lambda,
            tau: cfg.tau,
            form: cfg.ssl_form,
            weight_decay: cfg.weight_decay,
        };
        let (loss, grads, fwd) = objective.evaluate_with_forward(&params, mask.as_ref())?;
        if !loss.total.is_finite() {
            return Err(Error::Numeric(format!(
                "loss became {} at epoch {epoch}",
                loss.total
            )));
        }

        let logits = match mask {
            Some(_) => forward_propagated(&params, &prop, &ax, None).logits,
            None => fwd.logits,
        };
        let train_acc = accuracy(&logits, labels, &split.train);
        let val_acc = accuracy(&logits, labels, &split.val);
        curve.push(EpochRecord {
            epoch,
            task_loss: loss.task,
            ssl_loss: loss.ssl,
            total_loss: loss.total,
            train_acc,
            val_acc,
        });
        if val_acc > best_val {
            best_val = val_acc;
            best_epoch = epoch;
            best_params = params.clone();
        }
        if loss.total < best_loss - LOSS_TOLERANCE {
            best_loss = loss.total;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                debug!("early stop at epoch {epoch}");
                break;
            }
        }
        adam.update(&mut params, [&grads.w1, &grads.w2]);
        if !params.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite weights after epoch {epoch}"
            )));
        }
    }

    let eval = forward_propagated(&best_params, &prop, &ax, None);
    let metrics = Metrics {
        train_acc: accuracy(&eval.logits, labels, &split.train),
        val_acc: accuracy(&eval.logits, labels, &split.val),
        test_acc: accuracy(&eval.logits, labels, &split.test),
        best_epoch,
        epochs_run: curve.len(),
        curve,
    };
    Ok((best_params, metrics))
}

impl Metrics {
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        vec![
            ("train_acc".into(), format!("{:.6}", self.train_acc)),
            ("val_acc".into(), format!("{:.6}", self.val_acc)),
            ("test_acc".into(), format!("{:.6}", self.test_acc)),
            ("best_epoch".into(), self.best_epoch.to_string()),
            ("epochs_run".into(), self.epochs_run.to_string()),
        ]
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("epoch,task_loss,ssl_loss,total_loss,train_acc,val_acc\n");
        for r in &self.curve {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.task_loss, r.ssl_loss, r.total_loss, r.train_acc, r.val_acc
            ));
        }
        out
    }
}

/// `TGCN`, u64 shape of W1 (rows, cols), u64 shape of W2, then W1 and W2
/// as row-major little-endian f32.
pub fn write_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        w.write_all(CHECKPOINT_MAGIC)?;
        for d in [
            params.w1.nrows(),
            params.w1.ncols(),
            params.w2.nrows(),
            params.w2.ncols(),
        ] {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for x in params.w1.iter().chain(params.w2.iter()) {
            w.write_all(&(*x as f32).to_le_bytes())?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParams> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Data(format!("{}: not a checkpoint", path.display())));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        let mut b = [0u8; 8];
        r.read_exact(&mut b).map_err(io)?;
        *d = u64::from_le_bytes(b) as usize;
    }
    let mut read_matrix = |rows: usize, cols: usize| -> Result<Array2<f64>> {
        let mut raw = vec![0u8; rows * cols * 4];
        r.read_exact(&mut raw).map_err(|e| Error::io(path, e))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        Ok(Array2::from_shape_vec((rows, cols), data).expect("shape matches length"))
    };
    let w1 = read_matrix(dims[0], dims[1])?;
    let w2 = read_matrix(dims[2], dims[3])?;
    Ok(ModelParams { w1, w2 })
}
