//! Full-batch Adam training for the GCN and the dense network, with
//! optional per-epoch noise injection and validation early stopping.

use ndarray::Array2;

use super::{
    feat_mul, feat_t_mul, predictions_from_logits, relu_inplace, GcnParams, MlpParams, NormAdj,
};
use crate::error::{Error, Result};
use crate::graph::{InductiveSplit, SparseFeatures, SparseGraph};
use crate::rng::derive_seed;
use crate::smoothing::{sample_sparse_noise, SparseNoiseConfig};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// When set, each epoch trains on a fresh noisy draw of the
    /// training graph so the classifier sees the same corruption it
    /// will vote under.
    pub noise: Option<SparseNoiseConfig>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 1e-3,
            max_epochs: 1000,
            patience: 100,
            noise: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        Ok(())
    }
}

/// Full-batch Adam over a flat list of matrices.
pub(crate) struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
    lr: f64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    pub(crate) fn new(shapes: &[(usize, usize)], lr: f64) -> Self {
        Self {
            m: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            v: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            t: 0,
            lr,
        }
    }

    pub(crate) fn step(&mut self, params: &mut [&mut Array2<f64>], grads: &[Array2<f64>]) {
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t);
        let bc2 = 1.0 - BETA2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            azip(m, g, |m, g| *m = BETA1 * *m + (1.0 - BETA1) * g);
            azip(v, g, |v, g| *v = BETA2 * *v + (1.0 - BETA2) * g * g);
            for ((p, &m), &v) in p.iter_mut().zip(m.iter()).zip(v.iter()) {
                *p -= self.lr * (m / bc1) / ((v / bc2).sqrt() + EPS);
            }
        }
    }
}

fn azip(a: &mut Array2<f64>, b: &Array2<f64>, f: impl Fn(&mut f64, f64)) {
    for (x, &y) in a.iter_mut().zip(b.iter()) {
        f(x, y);
    }
}

/// Cross-entropy loss (mean over `labeled`) plus 0.5 * wd * L2, with
/// analytic gradients. `labeled` pairs are (node index, class).
pub fn gcn_loss_and_grad(
    adj: &NormAdj,
    features: &SparseFeatures,
    labeled: &[(u32, u32)],
    params: &GcnParams,
    weight_decay: f64,
) -> (f64, Array2<f64>, Array2<f64>) {
    let n = adj.n();
    let c = params.w2.ncols();
    let xw1 = feat_mul(features, &params.w1);
    let z1 = adj.spmm(&xw1);
    let mut h = z1.clone();
    relu_inplace(&mut h);
    let z2 = adj.spmm(&h);
    let logits = z2.dot(&params.w2);
    let preds = predictions_from_logits(&logits);

    let inv = 1.0 / labeled.len() as f64;
    let mut loss = 0.0;
    let mut dlogits = Array2::<f64>::zeros((n, c));
    for &(u, y) in labeled {
        let p = &preds[u as usize].probability_vector;
        loss -= (p[y as usize].max(1e-300)).ln() * inv;
        for k in 0..c {
            dlogits[(u as usize, k)] = (p[k] - if k == y as usize { 1.0 } else { 0.0 }) * inv;
        }
    }
    loss += 0.5
        * weight_decay
        * (params.w1.iter().map(|x| x * x).sum::<f64>()
            + params.w2.iter().map(|x| x * x).sum::<f64>());

    let mut dw2 = z2.t().dot(&dlogits);
    azip(&mut dw2, &params.w2, |g, w| *g += weight_decay * w);
    let dz2 = dlogits.dot(&params.w2.t());
    let dh = adj.spmm(&dz2); // A_hat is symmetric
    let mut dz1 = dh;
    for (d, &z) in dz1.iter_mut().zip(z1.iter()) {
        if z <= 0.0 {
            *d = 0.0;
        }
    }
    let dxw1 = adj.spmm(&dz1);
    let mut dw1 = feat_t_mul(features, &dxw1);
    azip(&mut dw1, &params.w1, |g, w| *g += weight_decay * w);
    (loss, dw1, dw2)
}

/// Dense-network loss/gradients over a batch of rows of `xs`.
pub fn mlp_loss_and_grad(
    xs: &Array2<f64>,
    ys: &[u32],
    params: &MlpParams,
    weight_decay: f64,
) -> (f64, Array2<f64>, Array2<f64>) {
    let c = params.w2.ncols();
    let z1 = xs.dot(&params.w1);
    let mut h = z1.clone();
    relu_inplace(&mut h);
    let logits = h.dot(&params.w2);
    let preds = predictions_from_logits(&logits);

    let inv = 1.0 / ys.len() as f64;
    let mut loss = 0.0;
    let mut dlogits = Array2::<f64>::zeros((xs.nrows(), c));
    for (i, &y) in ys.iter().enumerate() {
        let p = &preds[i].probability_vector;
        loss -= (p[y as usize].max(1e-300)).ln() * inv;
        for k in 0..c {
            dlogits[(i, k)] = (p[k] - if k == y as usize { 1.0 } else { 0.0 }) * inv;
        }
    }
    loss += 0.5
        * weight_decay
        * (params.w1.iter().map(|x| x * x).sum::<f64>()
            + params.w2.iter().map(|x| x * x).sum::<f64>());

    let mut dw2 = h.t().dot(&dlogits);
    azip(&mut dw2, &params.w2, |g, w| *g += weight_decay * w);
    let mut dz1 = dlogits.dot(&params.w2.t());
    for (d, &z) in dz1.iter_mut().zip(z1.iter()) {
        if z <= 0.0 {
            *d = 0.0;
        }
    }
    let mut dw1 = xs.t().dot(&dz1);
    azip(&mut dw1, &params.w1, |g, w| *g += weight_decay * w);
    (loss, dw1, dw2)
}

/// Optional per-epoch transform of the (noisy) training graph, e.g.
/// augmenter rewiring.
pub type GraphTransform<'a> = &'a (dyn Fn(&SparseGraph) -> SparseGraph + Sync);

/// Train the GCN on the inductive training graph with early stopping
/// on validation accuracy (evaluated on the clean validation graph).
/// Returns the best-validation parameters; deterministic given
/// `cfg.seed`.
pub fn train_classifier(
    g: &SparseGraph,
    split: &InductiveSplit,
    cfg: &TrainConfig,
    hidden: usize,
    transform: Option<GraphTransform<'_>>,
) -> Result<GcnParams> {
    cfg.validate()?;
    let labels = g.labels().ok_or_else(|| Error::Config("training needs labels".into()))?;
    if split.labeled_train.is_empty() {
        return Err(Error::Config("labeled training set is empty".into()));
    }
    let classes = g.num_classes();
    let d = g.features().dim();

    let train_nodes = split.train_nodes();
    let g_train = g.induced_subgraph(&train_nodes);
    // labeled pairs in training-graph coordinates
    let labeled: Vec<(u32, u32)> = split
        .labeled_train
        .iter()
        .map(|&u| {
            let pos = train_nodes.binary_search(&u).expect("labeled node in train set") as u32;
            (pos, labels[u as usize])
        })
        .collect();

    let val_nodes = split.validation_nodes();
    let g_val = g.induced_subgraph(&val_nodes);
    let val_adj = NormAdj::from_graph(&g_val);
    let val_pairs: Vec<(u32, u32)> = split
        .validation
        .iter()
        .map(|&u| {
            let pos = val_nodes.binary_search(&u).expect("validation node in val set") as u32;
            (pos, labels[u as usize])
        })
        .collect();

    let mut params = GcnParams::init(d, hidden, classes, derive_seed(cfg.seed, "gcn-init"));
    if cfg.max_epochs == 0 {
        return Ok(params);
    }
    let mut adam = Adam::new(
        &[(d, hidden), (hidden, classes)],
        cfg.learning_rate,
    );
    let clean_adj = NormAdj::from_graph(&g_train);

    let mut best = params.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut since_best = 0usize;
    for epoch in 0..cfg.max_epochs {
        let adj_storage;
        let adj = match &cfg.noise {
            Some(noise) => {
                let mut noisy = sample_sparse_noise(&g_train, noise, epoch as u64)?;
                if let Some(t) = transform {
                    noisy = t(&noisy);
                }
                adj_storage = NormAdj::from_graph(&noisy);
                &adj_storage
            }
            None => match transform {
                Some(t) => {
                    adj_storage = NormAdj::from_graph(&t(&g_train));
                    &adj_storage
                }
                None => &clean_adj,
            },
        };
        let (_loss, dw1, dw2) =
            gcn_loss_and_grad(adj, g_train.features(), &labeled, &params, cfg.weight_decay);
        adam.step(&mut [&mut params.w1, &mut params.w2], &[dw1, dw2]);

        let xw1 = feat_mul(g_val.features(), &params.w1);
        let mut h = val_adj.spmm(&xw1);
        relu_inplace(&mut h);
        let logits = val_adj.spmm(&h).dot(&params.w2);
        let preds = predictions_from_logits(&logits);
        let acc = val_pairs
            .iter()
            .filter(|&&(u, y)| preds[u as usize].class_index == y)
            .count() as f64
            / val_pairs.len().max(1) as f64;
        if acc > best_acc {
            best_acc = acc;
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok(best)
}

/// Train the dense network on (xs, ys) with optional early stopping on
/// a validation batch. No noise injection here; the Gaussian pipeline
/// perturbs its inputs before calling.
pub fn train_mlp(
    xs: &Array2<f64>,
    ys: &[u32],
    val: Option<(&Array2<f64>, &[u32])>,
    cfg: &TrainConfig,
    hidden: usize,
    classes: usize,
) -> Result<MlpParams> {
    cfg.validate()?;
    if xs.nrows() != ys.len() || ys.is_empty() {
        return Err(Error::Shape(format!("{} inputs vs {} labels", xs.nrows(), ys.len())));
    }
    let d = xs.ncols();
    let mut params = MlpParams::init(d, hidden, classes, derive_seed(cfg.seed, "mlp-init"));
    if cfg.max_epochs == 0 {
        return Ok(params);
    }
    let mut adam = Adam::new(&[(d, hidden), (hidden, classes)], cfg.learning_rate);
    let mut best = params.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut since_best = 0usize;
    for _epoch in 0..cfg.max_epochs {
        let (_loss, dw1, dw2) = mlp_loss_and_grad(xs, ys, &params, cfg.weight_decay);
        adam.step(&mut [&mut params.w1, &mut params.w2], &[dw1, dw2]);
        if let Some((vx, vy)) = val {
            let mut h = vx.dot(&params.w1);
            relu_inplace(&mut h);
            let preds = predictions_from_logits(&h.dot(&params.w2));
            let acc = vy
                .iter()
                .enumerate()
                .filter(|&(i, &y)| preds[i].class_index == y)
                .count() as f64
                / vy.len().max(1) as f64;
            if acc > best_acc {
                best_acc = acc;
                best = params.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
        } else {
            best = params.clone();
        }
    }
    Ok(best)
}
