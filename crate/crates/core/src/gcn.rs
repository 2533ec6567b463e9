//! Two-layer graph convolutional classifier and the contrastive loss over
//! mined positive pairs, with hand-derived gradients.
//!
//! ```text
//! H      = relu(A X W1)        A = D^-1/2 (adj + I) D^-1/2
//! logits = A H W2
//! loss   = CE(logits[train]) + lambda * SSL(H) + (wd / 2) |W1|^2
//! ```

use ndarray::{Array2, ArrayView1, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Symmetric-normalized adjacency with self-loops in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

pub fn normalize_adjacency(g: &Graph) -> Propagation {
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt())
        .collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(2 * g.num_edges() + n);
    let mut vals = Vec::with_capacity(cols.capacity());
    offsets.push(0);
    for u in 0..n {
        let mut self_done = false;
        for &w in g.neighbors(u) {
            if !self_done && w > u {
                cols.push(u);
                vals.push(inv_sqrt[u] * inv_sqrt[u]);
                self_done = true;
            }
            cols.push(w);
            vals.push(inv_sqrt[u] * inv_sqrt[w]);
        }
        if !self_done {
            cols.push(u);
            vals.push(inv_sqrt[u] * inv_sqrt[u]);
        }
        offsets.push(cols.len());
    }
    Propagation {
        offsets,
        cols,
        vals,
    }
}

impl Propagation {
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `A @ m`, rows accumulated in column order.
    pub fn apply(&self, m: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.num_nodes(), m.ncols()));
        for (u, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            for k in self.offsets[u]..self.offsets[u + 1] {
                row.scaled_add(self.vals[k], &m.row(self.cols[k]));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.num_nodes();
        let mut d = Array2::zeros((n, n));
        for u in 0..n {
            for k in self.offsets[u]..self.offsets[u + 1] {
                d[[u, self.cols[k]]] = self.vals[k];
            }
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

impl ModelParams {
    /// Glorot-uniform initialization.
    pub fn init(
        feature_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut glorot = |rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..bound))
        };
        let w1 = glorot(feature_dim, hidden_dim);
        let w2 = glorot(hidden_dim, num_classes);
        ModelParams { w1, w2 }
    }

    pub fn zeros(feature_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        ModelParams {
            w1: Array2::zeros((feature_dim, hidden_dim)),
            w2: Array2::zeros((hidden_dim, num_classes)),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(self.w2.iter()).all(|x| x.is_finite())
    }
}

#[derive(Clone, Debug)]
pub struct Forward {
    /// Pre-activation of the hidden layer, `A X W1`.
    pub hidden_pre: Array2<f64>,
    /// Hidden embeddings `H`; the contrastive term reads these.
    pub embeddings: Array2<f64>,
    pub logits: Array2<f64>,
}

fn check_shapes(params: &ModelParams, prop: &Propagation, x: &Array2<f64>) -> Result<()> {
    if x.nrows() != prop.num_nodes()
        || x.ncols() != params.w1.nrows()
        || params.w1.ncols() != params.w2.nrows()
    {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch: X {:?}, W1 {:?}, W2 {:?}, {} nodes",
            x.dim(),
            params.w1.dim(),
            params.w2.dim(),
            prop.num_nodes()
        )));
    }
    Ok(())
}

pub fn forward(params: &ModelParams, prop: &Propagation, x: &Array2<f64>) -> Result<Forward> {
    check_shapes(params, prop, x)?;
    Ok(forward_propagated(params, prop, &prop.apply(x), None))
}

/// Forward pass from precomputed `A X`. `dropout` scales hidden units
/// before the second layer (the embeddings stay undropped).
pub(crate) fn forward_propagated(
    params: &ModelParams,
    prop: &Propagation,
    ax: &Array2<f64>,
    dropout: Option<&Array2<f64>>,
) -> Forward {
    let hidden_pre = ax.dot(&params.w1);
    let embeddings = hidden_pre.mapv(|z| z.max(0.0));
    let logits = match dropout {
        Some(mask) => prop.apply(&(&embeddings * mask).dot(&params.w2)),
        None => prop.apply(&embeddings.dot(&params.w2)),
    };
    Forward {
        hidden_pre,
        embeddings,
        logits,
    }
}

fn log_softmax(row: ArrayView1<'_, f64>) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    row.iter().map(|&z| z - lse).collect()
}

/// Mean cross-entropy over `nodes` and its gradient w.r.t. the logits.
pub fn cross_entropy(
    logits: &Array2<f64>,
    labels: &[usize],
    nodes: &[NodeId],
) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(logits.dim());
    let scale = 1.0 / nodes.len() as f64;
    let mut loss = 0.0;
    for &v in nodes {
        let ls = log_softmax(logits.row(v));
        loss -= ls[labels[v]];
        for (c, l) in ls.iter().enumerate() {
            grad[[v, c]] = scale * (l.exp() - if c == labels[v] { 1.0 } else { 0.0 });
        }
    }
    (loss * scale, grad)
}

pub fn accuracy(logits: &Array2<f64>, labels: &[usize], nodes: &[NodeId]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let correct = nodes
        .iter()
        .filter(|&&v| {
            let row = logits.row(v);
            let pred = (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            pred == labels[v]
        })
        .count();
    correct as f64 / nodes.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SslForm {
    /// `-log(e^{s+/t} / (e^{s+/t} + sum_w e^{s_w/t}))` over sampled negatives.
    InfoNce,
    /// Single-negative ratio `-log(e^{s+/t} / e^{s-/t})`; unbounded below.
    Literal,
}

/// One anchor-positive pair with its negatives and weight.
#[derive(Clone, Debug, PartialEq)]
pub struct SslItem {
    pub anchor: NodeId,
    pub positive: NodeId,
    pub negatives: Vec<NodeId>,
    pub weight: f64,
}

/// Rows of `h` scaled to unit length (zero rows stay zero) and their norms.
fn normalize_rows(h: &Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let mut z = h.clone();
    let mut norms = Vec::with_capacity(h.nrows());
    for mut row in z.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm > 1e-12 {
            row /= norm;
        } else {
            row.fill(0.0);
        }
        norms.push(norm);
    }
    (z, norms)
}

/// Dot product with four independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Contrastive loss averaged over items.
pub fn ssl_loss(
    embeddings: &Array2<f64>,
    items: &[SslItem],
    tau: f64,
    form: SslForm,
) -> Result<f64> {
    ssl_loss_and_grad(embeddings, items, tau, form).map(|(l, _)| l)
}

/// Contrastive loss and its gradient w.r.t. the raw embeddings. Returns
/// zero loss for an empty item list.
pub fn ssl_loss_and_grad(
    embeddings: &Array2<f64>,
    items: &[SslItem],
    tau: f64,
    form: SslForm,
) -> Result<(f64, Array2<f64>)> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "temperature {tau} must be positive"
        )));
    }
    let mut grad = Array2::zeros(embeddings.dim());
    if items.is_empty() {
        return Ok((0.0, grad));
    }
    let (z, norms) = normalize_rows(embeddings);
    let d = z.ncols();
    let zs = z.as_slice().expect("standard layout");
    let row = |k: usize| &zs[k * d..(k + 1) * d];
    let mut dz = vec![0.0; zs.len()];
    let mut add = |k: usize, c: f64, src: &[f64]| {
        for (t, s) in dz[k * d..(k + 1) * d].iter_mut().zip(src) {
            *t += c * s;
        }
    };
    let scale = 1.0 / items.len() as f64;
    let mut total = 0.0;
    let mut nodes = Vec::new();
    let mut logits = Vec::new();
    for item in items {
        let u = item.anchor;
        let w = item.weight * scale / tau;
        let zu = row(u);
        match form {
            SslForm::InfoNce => {
                nodes.clear();
                nodes.push(item.positive);
                nodes.extend_from_slice(&item.negatives);
                logits.clear();
                logits.extend(nodes.iter().map(|&k| dot(zu, row(k)) / tau));
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let positive = logits[0];
                for l in logits.iter_mut() {
                    *l = (*l - max).exp();
                }
                let denom: f64 = logits.iter().sum();
                total += item.weight * (max + denom.ln() - positive);
                // d/dz_u = (sum_k p_k z_k - z_v) / tau ; d/dz_k = (p_k - [k = v]) z_u / tau
                for (idx, (&k, &e)) in nodes.iter().zip(&logits).enumerate() {
                    let p = e / denom;
                    let coeff = w * (p - if idx == 0 { 1.0 } else { 0.0 });
                    add(u, coeff, row(k));
                    add(k, coeff, zu);
                }
            }
            SslForm::Literal => {
                let Some(&neg) = item.negatives.first() else {
                    continue;
                };
                let v = item.positive;
                total += item.weight * (dot(zu, row(neg)) - dot(zu, row(v))) / tau;
                add(u, w, row(neg));
                add(u, -w, row(v));
                add(neg, w, zu);
                add(v, -w, zu);
            }
        }
    }
    let dz = Array2::from_shape_vec(z.dim(), dz).expect("shape matches length");
    // back through row normalization: dh = (dz - z (z . dz)) / |h|
    for (i, mut g) in grad.axis_iter_mut(Axis(0)).enumerate() {
        if norms[i] <= 1e-12 {
            continue;
        }
        let zi = z.row(i);
        let dzi = dz.row(i);
        let proj = zi.dot(&dzi);
        Zip::from(&mut g)
            .and(&dzi)
            .and(&zi)
            .for_each(|g, &d, &zz| *g = (d - zz * proj) / norms[i]);
    }
    Ok((total * scale, grad))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub task: f64,
    pub ssl: f64,
    pub regularization: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

/// Inputs to the joint objective that stay fixed for one evaluation.
pub struct JointObjective<'a> {
    pub prop: &'a Propagation,
    /// Precomputed `A X`.
    pub ax: &'a Array2<f64>,
    pub labels: &'a [usize],
    pub train: &'a [NodeId],
    pub items: &'a [SslItem],
    pub lambda: f64,
    pub tau: f64,
    pub form: SslForm,
    pub weight_decay: f64,
}

impl JointObjective<'_> {
    /// Joint loss and analytic gradients; `dropout` is an optional hidden
    /// mask (already scaled by the keep probability).
    pub fn evaluate(
        &self,
        params: &ModelParams,
        dropout: Option<&Array2<f64>>,
    ) -> Result<(LossParts, Gradients)> {
        self.evaluate_with_forward(params, dropout)
            .map(|(l, g, _)| (l, g))
    }

    /// Like `evaluate`, also returning the forward pass it used.
    pub(crate) fn evaluate_with_forward(
        &self,
        params: &ModelParams,
        dropout: Option<&Array2<f64>>,
    ) -> Result<(LossParts, Gradients, Forward)> {
        let fwd = forward_propagated(params, self.prop, self.ax, dropout);
        let (task, dlogits) = cross_entropy(&fwd.logits, self.labels, self.train);
        // logits = A (Hd W2), A symmetric
        let dhw2 = self.prop.apply(&dlogits);
        let hd = match dropout {
            Some(mask) => &fwd.embeddings * mask,
            None => fwd.embeddings.clone(),
        };
        let gw2 = hd.t().dot(&dhw2);
        let mut dh = dhw2.dot(&params.w2.t());
        if let Some(mask) = dropout {
            dh *= mask;
        }
        let mut ssl = 0.0;
        if self.lambda != 0.0 {
            let (l, g) = ssl_loss_and_grad(&fwd.embeddings, self.items, self.tau, self.form)?;
            ssl = l;
            dh.scaled_add(self.lambda, &g);
        }
        Zip::from(&mut dh).and(&fwd.hidden_pre).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        let mut gw1 = self.ax.t().dot(&dh);
        gw1.scaled_add(self.weight_decay, &params.w1);
        let regularization = 0.5 * self.weight_decay * params.w1.iter().map(|x| x * x).sum::<f64>();
        let parts = LossParts {
            task,
            ssl,
            regularization,
            total: task + self.lambda * ssl + regularization,
        };
        Ok((parts, Gradients { w1: gw1, w2: gw2 }, fwd))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn single_node_propagation() {
        let g = Graph::from_edges(1, &[]).unwrap();
        assert_eq!(normalize_adjacency(&g).to_dense(), array![[1.0]]);
    }

    #[test]
    fn single_edge_propagation() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let d = normalize_adjacency(&g).to_dense();
        for x in d.iter() {
            assert_abs_diff_eq!(*x, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn regular_graph_rows_sum_equal() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        let d = normalize_adjacency(&g).to_dense();
        let sums: Vec<f64> = d.rows().into_iter().map(|r| r.sum()).collect();
        for s in &sums {
            assert_abs_diff_eq!(*s, sums[0], epsilon = 1e-15);
        }
        assert_eq!(d, d.t());
    }

    #[test]
    fn zero_weights_give_uniform_softmax() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let prop = normalize_adjacency(&g);
        let x = Array2::from_elem((3, 4), 1.0);
        let out = forward(&ModelParams::zeros(4, 5, 3), &prop, &x).unwrap();
        assert!(out.logits.iter().all(|&z| z == 0.0));
        let (loss, _) = cross_entropy(&out.logits, &[0, 1, 2], &[0, 1, 2]);
        assert_abs_diff_eq!(loss, 3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn edgeless_graph_is_an_mlp() {
        let g = Graph::from_edges(4, &[]).unwrap();
        let prop = normalize_adjacency(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let params = ModelParams::init(3, 4, 2, &mut rng);
        let x = Array2::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64 * 0.1 - 0.5);
        let out = forward(&params, &prop, &x).unwrap();
        let mlp = x.dot(&params.w1).mapv(|z: f64| z.max(0.0)).dot(&params.w2);
        assert_eq!(out.logits, mlp);
    }

    #[test]
    fn forward_rejects_bad_shapes() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let prop = normalize_adjacency(&g);
        let x = Array2::zeros((2, 3));
        assert!(forward(&ModelParams::zeros(4, 2, 2), &prop, &x).is_err());
    }

    #[test]
    fn ssl_closed_form() {
        // anchor and positive identical, k orthogonal negatives, tau = 0.5
        let k = 3;
        let mut h = Array2::zeros((k + 2, k + 1));
        h[[0, 0]] = 2.0;
        h[[1, 0]] = 1.0;
        for j in 0..k {
            h[[2 + j, 1 + j]] = 1.0;
        }
        let item = SslItem {
            anchor: 0,
            positive: 1,
            negatives: (2..2 + k).collect(),
            weight: 1.0,
        };
        let loss = ssl_loss(&h, &[item], 0.5, SslForm::InfoNce).unwrap();
        let e2 = 2f64.exp();
        assert_abs_diff_eq!(loss, -(e2 / (e2 + k as f64)).ln(), epsilon = 1e-12);
    }

    #[test]
    fn ssl_degenerate_cases() {
        let h = array![[1.0, 0.0], [1.0, 0.0]];
        let item = SslItem {
            anchor: 0,
            positive: 1,
            negatives: vec![],
            weight: 1.0,
        };
        assert_eq!(
            ssl_loss(&h, std::slice::from_ref(&item), 0.5, SslForm::InfoNce).unwrap(),
            0.0
        );
        assert_eq!(ssl_loss(&h, &[], 0.5, SslForm::InfoNce).unwrap(), 0.0);
        assert!(ssl_loss(&h, &[item], 0.0, SslForm::InfoNce).is_err());
    }

    #[test]
    fn literal_form_is_score_gap() {
        let h = array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        let item = SslItem {
            anchor: 0,
            positive: 1,
            negatives: vec![2],
            weight: 1.0,
        };
        let loss = ssl_loss(&h, &[item], 0.5, SslForm::Literal).unwrap();
        assert_abs_diff_eq!(loss, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn accuracy_counts_argmax() {
        let logits = array![[2.0, 1.0], [0.0, 3.0], [1.0, 1.0]];
        assert_eq!(accuracy(&logits, &[0, 0, 0], &[0, 1, 2]), 2.0 / 3.0);
        assert_eq!(accuracy(&logits, &[0, 0, 0], &[]), 0.0);
    }
    fn total_loss(obj: &JointObjective<'_>, params: &ModelParams) -> f64 {
        obj.evaluate(params, None).unwrap().0.total
    }

    #[test]
    fn gradients_match_central_differences() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4)]).unwrap();
        let prop = normalize_adjacency(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((6, 3), |_| rng.gen_range(-1.0..1.0));
        let ax = prop.apply(&x);
        let params = ModelParams::init(3, 4, 2, &mut rng);
        let items = vec![
            SslItem {
                anchor: 0,
                positive: 5,
                negatives: vec![2, 3],
                weight: 1.0,
            },
            SslItem {
                anchor: 2,
                positive: 4,
                negatives: vec![0],
                weight: 0.5,
            },
        ];
        let labels = [0, 1, 0, 1, 0, 1];
        let obj = JointObjective {
            prop: &prop,
            ax: &ax,
            labels: &labels,
            train: &[0, 1, 3],
            items: &items,
            lambda: 0.7,
            tau: 0.5,
            form: SslForm::InfoNce,
            weight_decay: 5e-4,
        };
        let (_, grads) = obj.evaluate(&params, None).unwrap();
        let h = 1e-6;
        for (which, analytic) in [(0, &grads.w1), (1, &grads.w2)] {
            for idx in ndarray::indices(analytic.dim()) {
                let mut plus = params.clone();
                let mut minus = params.clone();
                let (p, m) = if which == 0 {
                    (&mut plus.w1, &mut minus.w1)
                } else {
                    (&mut plus.w2, &mut minus.w2)
                };
                p[idx] += h;
                m[idx] -= h;
                let numeric = (total_loss(&obj, &plus) - total_loss(&obj, &minus)) / (2.0 * h);
                assert_abs_diff_eq!(analytic[idx], numeric, epsilon = 1e-6);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn rotate(h: &Array2<f64>, theta: f64) -> Array2<f64> {
            let (c, s) = (theta.cos(), theta.sin());
            let r = array![[c, -s], [s, c]];
            h.dot(&r)
        }

        proptest! {
            #[test]
            fn ssl_invariant_under_rotation(
                rows in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 4),
                theta in 0.0f64..std::f64::consts::TAU,
            ) {
                let h = Array2::from_shape_fn((4, 2), |(i, j)| if j == 0 { rows[i].0 } else { rows[i].1 });
                let item = SslItem { anchor: 0, positive: 1, negatives: vec![2, 3], weight: 1.0 };
                let a = ssl_loss(&h, std::slice::from_ref(&item), 0.5, SslForm::InfoNce).unwrap();
                let b = ssl_loss(&rotate(&h, theta), &[item], 0.5, SslForm::InfoNce).unwrap();
                prop_assert!((a - b).abs() < 1e-9);
            }

            #[test]
            fn closer_positive_lowers_loss(a in 0.0f64..3.0, b in 0.0f64..3.0) {
                prop_assume!((a - b).abs() > 1e-6);
                let with_angle = |t: f64| {
                    let h = array![[1.0, 0.0], [t.cos(), t.sin()], [0.0, 1.0]];
                    let item = SslItem { anchor: 0, positive: 1, negatives: vec![2], weight: 1.0 };
                    ssl_loss(&h, &[item], 0.5, SslForm::InfoNce).unwrap()
                };
                let (near, far) = (a.min(b), a.max(b));
                prop_assert!(with_angle(near) < with_angle(far));
            }
        }
    }
}
