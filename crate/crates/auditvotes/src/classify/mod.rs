//! Base classifiers: a 2-layer GCN over sparse graphs and a small
//! dense network for vector inputs, with analytic gradients, Adam
//! training, and binary/JSON checkpoints.

mod checkpoint;
mod train;

pub use checkpoint::{
    export_gcn_json, load_gcn_checkpoint, load_mlp_checkpoint, save_gcn_checkpoint,
    save_mlp_checkpoint,
};
pub(crate) use train::Adam;
pub use train::{
    gcn_loss_and_grad, mlp_loss_and_grad, train_classifier, train_mlp, GraphTransform,
    TrainConfig,
};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{SparseFeatures, SparseGraph};

/// 2-layer GCN weights (no biases): logits = A_hat ReLU(A_hat X w1) w2.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w1: Array2<f64>, // d x h
    pub w2: Array2<f64>, // h x C
}

/// 2-layer dense network weights: logits = ReLU(x w1) w2.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>, // d x h
    pub w2: Array2<f64>, // h x C
}

/// One node's (or input's) classification output.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: u32,
    /// max of `probability_vector`
    pub confidence: f64,
    pub probability_vector: Vec<f64>,
}

/// Symmetric-normalized adjacency with self-loops in CSR form:
/// A_hat = D~^{-1/2} (A + I) D~^{-1/2}.
pub struct NormAdj {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl NormAdj {
    pub fn from_graph(g: &SparseGraph) -> Self {
        let n = g.n();
        let scale: Vec<f64> = (0..n as u32)
            .map(|u| 1.0 / ((g.degree(u) + 1) as f64).sqrt())
            .collect();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for u in 0..n as u32 {
            // neighbor lists are sorted; splice the self-loop in order
            let mut placed_self = false;
            for &v in g.neighbors(u) {
                if !placed_self && v > u {
                    indices.push(u);
                    values.push(scale[u as usize] * scale[u as usize]);
                    placed_self = true;
                }
                indices.push(v);
                values.push(scale[u as usize] * scale[v as usize]);
            }
            if !placed_self {
                indices.push(u);
                values.push(scale[u as usize] * scale[u as usize]);
            }
            indptr.push(indices.len());
        }
        Self { n, indptr, indices, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// A_hat * x for dense x (n x k).
    pub fn spmm(&self, x: &Array2<f64>) -> Array2<f64> {
        let k = x.ncols();
        let mut out = Array2::zeros((self.n, k));
        for u in 0..self.n {
            let mut row = out.row_mut(u);
            for idx in self.indptr[u]..self.indptr[u + 1] {
                let v = self.indices[idx] as usize;
                let w = self.values[idx];
                let src = x.row(v);
                for (o, &s) in row.iter_mut().zip(src.iter()) {
                    *o += w * s;
                }
            }
        }
        out
    }
}

/// Sparse features (n x d) times dense (d x k).
pub fn feat_mul(f: &SparseFeatures, w: &Array2<f64>) -> Array2<f64> {
    let k = w.ncols();
    let mut out = Array2::zeros((f.n(), k));
    for u in 0..f.n() as u32 {
        let (dims, vals) = f.row(u);
        let mut row = out.row_mut(u as usize);
        for (&j, &v) in dims.iter().zip(vals) {
            let src = w.row(j as usize);
            for (o, &s) in row.iter_mut().zip(src.iter()) {
                *o += v * s;
            }
        }
    }
    out
}

/// X^T * m: sparse features transposed (d x n) times dense (n x k).
pub fn feat_t_mul(f: &SparseFeatures, m: &Array2<f64>) -> Array2<f64> {
    let k = m.ncols();
    let mut out = Array2::zeros((f.dim(), k));
    for u in 0..f.n() as u32 {
        let (dims, vals) = f.row(u);
        let src = m.row(u as usize);
        for (&j, &v) in dims.iter().zip(vals) {
            let mut row = out.row_mut(j as usize);
            for (o, &s) in row.iter_mut().zip(src.iter()) {
                *o += v * s;
            }
        }
    }
    out
}

pub(crate) fn relu_inplace(x: &mut Array2<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}

/// Row-wise softmax with argmax ties broken toward the smaller index.
pub fn predictions_from_logits(logits: &Array2<f64>) -> Vec<Prediction> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&z| (z - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let probs: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
            let (mut best, mut best_p) = (0u32, f64::NEG_INFINITY);
            for (c, &p) in probs.iter().enumerate() {
                if p > best_p {
                    best = c as u32;
                    best_p = p;
                }
            }
            Prediction { class_index: best, confidence: best_p, probability_vector: probs }
        })
        .collect()
}

/// Glorot-uniform initialization with a seeded stream.
pub fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

impl GcnParams {
    pub fn init(d: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self { w1: glorot(d, hidden, &mut rng), w2: glorot(hidden, classes, &mut rng) }
    }

    pub fn check(&self, d: usize) -> Result<()> {
        if self.w1.nrows() != d {
            return Err(Error::Shape(format!(
                "classifier expects {} feature dims, graph has {d}",
                self.w1.nrows()
            )));
        }
        if self.w1.ncols() != self.w2.nrows() {
            return Err(Error::Shape("w1/w2 hidden dims disagree".into()));
        }
        Ok(())
    }
}

impl MlpParams {
    pub fn init(d: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self { w1: glorot(d, hidden, &mut rng), w2: glorot(hidden, classes, &mut rng) }
    }
}

/// Full GCN forward pass: builds the normalized adjacency from `g`.
pub fn gcn_forward(g: &SparseGraph, params: &GcnParams) -> Result<Vec<Prediction>> {
    params.check(g.features().dim())?;
    let model = GcnModel::new(g.features(), params.clone());
    Ok(model.forward(&NormAdj::from_graph(g)))
}

/// Inference-time GCN with X·w1 precomputed; X and the parameters are
/// fixed across noise samples, only the adjacency changes.
pub struct GcnModel {
    params: GcnParams,
    xw1: Array2<f64>,
}

impl GcnModel {
    pub fn new(features: &SparseFeatures, params: GcnParams) -> Self {
        let xw1 = feat_mul(features, &params.w1);
        Self { params, xw1 }
    }

    pub fn params(&self) -> &GcnParams {
        &self.params
    }

    pub fn forward(&self, adj: &NormAdj) -> Vec<Prediction> {
        let mut h = adj.spmm(&self.xw1);
        relu_inplace(&mut h);
        let z2 = adj.spmm(&h);
        let logits = z2.dot(&self.params.w2);
        predictions_from_logits(&logits)
    }

    pub fn forward_graph(&self, g: &SparseGraph) -> Vec<Prediction> {
        self.forward(&NormAdj::from_graph(g))
    }
}

/// Dense network forward pass for one input vector.
pub fn mlp_forward(x: &[f64], params: &MlpParams) -> Result<Prediction> {
    if x.len() != params.w1.nrows() {
        return Err(Error::Shape(format!(
            "input dim {} vs w1 rows {}",
            x.len(),
            params.w1.nrows()
        )));
    }
    let xs = Array2::from_shape_vec((1, x.len()), x.to_vec())
        .map_err(|e| Error::Shape(e.to_string()))?;
    let mut h = xs.dot(&params.w1);
    relu_inplace(&mut h);
    let logits = h.dot(&params.w2);
    Ok(predictions_from_logits(&logits).remove(0))
}

/// Fraction of `nodes` whose prediction matches `labels`.
pub fn accuracy(preds: &[Prediction], labels: &[u32], nodes: &[u32]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes
        .iter()
        .filter(|&&u| preds[u as usize].class_index == labels[u as usize])
        .count();
    hits as f64 / nodes.len() as f64
}
