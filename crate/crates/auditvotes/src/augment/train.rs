//! Augmenter training: binary cross-entropy edge prediction over
//! sampled positive/negative pairs, full-batch Adam.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AugmenterParams, FaeParams, ScoreKind, SimParams};
use crate::classify::{feat_mul, feat_t_mul, glorot, relu_inplace, TrainConfig};
use crate::classify::Adam;
use crate::error::{Error, Result};
use crate::graph::{SparseFeatures, SparseGraph};
use crate::rng::derive_seed;

/// Architecture sizes the augmenters need beyond the training config.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AugmenterDims {
    /// hidden width of the embedding augmenter
    pub h2: usize,
    /// embedding dimension of the embedding augmenter
    pub e: usize,
    /// number of similarity heads
    pub m: usize,
}

impl Default for AugmenterDims {
    fn default() -> Self {
        Self { h2: 256, e: 64, m: 4 }
    }
}

pub struct TrainedAugmenter {
    pub params: AugmenterParams,
    /// BCE per epoch, starting with the pre-training loss.
    pub loss_curve: Vec<f64>,
}

/// Labelled training pairs: 90% of the graph's edges as positives plus
/// 10x that many uniformly sampled non-edges as negatives.
fn sample_pairs(g: &SparseGraph, seed: u64) -> Result<Vec<(u32, u32, f64)>> {
    if g.edge_count() < 10 {
        return Err(Error::Config(format!(
            "augmenter training needs at least 10 edges, graph has {}",
            g.edge_count()
        )));
    }
    let n = g.n() as u64;
    let non_edges = n * (n - 1) / 2 - g.edge_count() as u64;
    if non_edges == 0 {
        return Err(Error::Config("complete graph has no negative pairs to sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = g.edges().to_vec();
    edges.shuffle(&mut rng);
    let pos = (edges.len() * 9) / 10;
    let mut pairs: Vec<(u32, u32, f64)> =
        edges[..pos].iter().map(|&(u, v)| (u, v, 1.0)).collect();
    let want_neg = ((pos as u64) * 10).min(non_edges) as usize;
    let mut have = 0usize;
    let mut seen = std::collections::HashSet::new();
    while have < want_neg {
        let u = rng.random_range(0..n as u32);
        let v = rng.random_range(0..n as u32);
        if u == v {
            continue;
        }
        let p = (u.min(v), u.max(v));
        if !g.has_edge(p.0, p.1) && seen.insert(p) {
            pairs.push((p.0, p.1, 0.0));
            have += 1;
        }
    }
    Ok(pairs)
}

fn bce(s: f64, y: f64) -> f64 {
    let s = s.clamp(1e-12, 1.0 - 1e-12);
    -(y * s.ln() + (1.0 - y) * (1.0 - s).ln())
}

/// BCE loss and gradients for the embedding augmenter over labelled
/// pairs. Forward: H = ReLU(X w2), Z = H w1, s = sigmoid(z_u . z_v).
pub fn fae_loss_and_grad(
    feats: &SparseFeatures,
    pairs: &[(u32, u32, f64)],
    params: &FaeParams,
) -> (f64, Array2<f64>, Array2<f64>) {
    let mut h = feat_mul(feats, &params.w2);
    relu_inplace(&mut h);
    let z = h.dot(&params.w1);
    let inv = 1.0 / pairs.len() as f64;

    let mut loss = 0.0;
    let mut dz = Array2::<f64>::zeros(z.raw_dim());
    for &(u, v, y) in pairs {
        let (zu, zv) = (z.row(u as usize), z.row(v as usize));
        let s = 1.0 / (1.0 + (-zu.dot(&zv)).exp());
        loss += bce(s, y) * inv;
        let coef = (s - y) * inv; // d(bce)/d(z_u . z_v)
        {
            let mut row = dz.row_mut(u as usize);
            for (g, &x) in row.iter_mut().zip(zv.iter()) {
                *g += coef * x;
            }
        }
        let mut row = dz.row_mut(v as usize);
        for (g, &x) in row.iter_mut().zip(zu.iter()) {
            *g += coef * x;
        }
    }
    let dw1 = h.t().dot(&dz);
    let mut dh = dz.dot(&params.w1.t());
    for (d, &hv) in dh.iter_mut().zip(h.iter()) {
        if hv <= 0.0 {
            *d = 0.0;
        }
    }
    let dw2 = feat_t_mul(feats, &dh);
    (loss, dw2, dw1)
}

/// BCE loss and gradients for the multi-head similarity augmenter.
/// Scores live in [-1, 1]; the loss maps them through (s + 1) / 2.
pub fn sim_loss_and_grad(
    feats: &SparseFeatures,
    pairs: &[(u32, u32, f64)],
    weights: &Array2<f64>, // m x d
) -> (f64, Array2<f64>) {
    let m = weights.nrows();
    let d = weights.ncols();
    let wsq: Vec<Vec<f64>> = (0..m)
        .map(|q| weights.row(q).iter().map(|&w| w * w).collect())
        .collect();
    // per-head squared weighted norms per node
    let n = feats.n();
    let mut norm2 = vec![vec![0.0f64; n]; m];
    for q in 0..m {
        for u in 0..n as u32 {
            let (dims, vals) = feats.row(u);
            norm2[q][u as usize] = dims
                .iter()
                .zip(vals)
                .map(|(&j, &v)| wsq[q][j as usize] * v * v)
                .sum();
        }
    }

    let inv = 1.0 / pairs.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::<f64>::zeros((m, d));
    for &(u, v, y) in pairs {
        // forward per head
        let mut cos = vec![0.0f64; m];
        for (q, wq) in wsq.iter().enumerate() {
            let (a2, b2) = (norm2[q][u as usize], norm2[q][v as usize]);
            if a2 == 0.0 || b2 == 0.0 {
                continue;
            }
            cos[q] = super::weighted_sparse_dot(feats, u, v, wq) / (a2 * b2).sqrt();
        }
        let s: f64 = cos.iter().sum::<f64>() / m as f64;
        // the mean cosine is the edge probability itself; an affine link
        // like (s+1)/2 saturates the BCE (negatives never drop below 1/2)
        // and stalls training
        let p = s.clamp(1e-7, 1.0 - 1e-7);
        loss += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()) * inv;
        // d(loss)/d(s) = (p - y) / (p (1 - p))
        let dls = (p - y) / (p * (1.0 - p)) * inv;
        for q in 0..m {
            let (a2, b2) = (norm2[q][u as usize], norm2[q][v as usize]);
            if a2 == 0.0 || b2 == 0.0 {
                continue;
            }
            let ab = (a2 * b2).sqrt();
            let dcos = dls / m as f64;
            let (du, vu) = feats.row(u);
            let (dv, vv) = feats.row(v);
            // norm terms over each support
            for (&j, &x) in du.iter().zip(vu) {
                grad[(q, j as usize)] -=
                    dcos * cos[q] * weights[(q, j as usize)] * x * x / a2;
            }
            for (&j, &x) in dv.iter().zip(vv) {
                grad[(q, j as usize)] -=
                    dcos * cos[q] * weights[(q, j as usize)] * x * x / b2;
            }
            // cross term over the shared support
            let (mut i, mut k) = (0usize, 0usize);
            while i < du.len() && k < dv.len() {
                match du[i].cmp(&dv[k]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => k += 1,
                    std::cmp::Ordering::Equal => {
                        let j = du[i] as usize;
                        grad[(q, j)] += dcos * 2.0 * weights[(q, j)] * vu[i] * vv[k] / ab;
                        i += 1;
                        k += 1;
                    }
                }
            }
        }
    }
    (loss, grad)
}

/// Train an edge-prediction augmenter on the clean training graph.
/// Positives are 90% of the edges, negatives 10x as many sampled
/// non-edges; full-batch Adam for `cfg.max_epochs` epochs.
pub fn train_augmenter(
    g_train: &SparseGraph,
    kind: ScoreKind,
    cfg: &TrainConfig,
    dims: &AugmenterDims,
) -> Result<TrainedAugmenter> {
    cfg.validate()?;
    if kind == ScoreKind::Jaccard {
        return Err(Error::Config("the Jaccard augmenter is learning-free".into()));
    }
    if dims.m == 0 {
        return Err(Error::Config("similarity augmenter needs at least one head".into()));
    }
    let pairs = sample_pairs(g_train, derive_seed(cfg.seed, "aug-pairs"))?;
    let feats = g_train.features();
    let d = feats.dim();
    let mut curve = Vec::with_capacity(cfg.max_epochs + 1);

    match kind {
        ScoreKind::Fae => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "fae-init"));
            let mut params = FaeParams {
                w2: glorot(d, dims.h2, &mut rng),
                w1: glorot(dims.h2, dims.e, &mut rng),
            };
            let mut adam = Adam::new(&[(d, dims.h2), (dims.h2, dims.e)], cfg.learning_rate);
            for _ in 0..cfg.max_epochs {
                let (loss, dw2, dw1) = fae_loss_and_grad(feats, &pairs, &params);
                curve.push(loss);
                adam.step(&mut [&mut params.w2, &mut params.w1], &[dw2, dw1]);
            }
            curve.push(fae_loss_and_grad(feats, &pairs, &params).0);
            Ok(TrainedAugmenter { params: AugmenterParams::Fae(params), loss_curve: curve })
        }
        ScoreKind::Sim => {
            // all-ones init plus small seeded noise so heads decorrelate
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "sim-init"));
            let mut w = Array2::from_shape_fn((dims.m, d), |_| {
                1.0 + rng.random_range(-0.01..0.01)
            });
            let mut adam = Adam::new(&[(dims.m, d)], cfg.learning_rate);
            for _ in 0..cfg.max_epochs {
                let (loss, grad) = sim_loss_and_grad(feats, &pairs, &w);
                curve.push(loss);
                adam.step(&mut [&mut w], &[grad]);
            }
            curve.push(sim_loss_and_grad(feats, &pairs, &w).0);
            let weights = (0..dims.m).map(|q| w.row(q).to_vec()).collect();
            Ok(TrainedAugmenter {
                params: AugmenterParams::Sim(SimParams { weights }),
                loss_curve: curve,
            })
        }
        ScoreKind::Jaccard => unreachable!(),
    }
}
