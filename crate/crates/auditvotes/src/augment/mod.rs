//! Edge-scoring augmenters (Jaccard, learned embedding, multi-head
//! similarity), noise-adaptive threshold selection, and graph
//! rewiring. Scores depend only on node features, so one score matrix
//! serves every noise sample.

mod train;

pub use train::{
    fae_loss_and_grad, sim_loss_and_grad, train_augmenter, AugmenterDims, TrainedAugmenter,
};

use std::sync::Arc;

use ndarray::Array2;

use crate::classify::feat_mul;
use crate::error::{Error, Result};
use crate::graph::{PairScorer, SparseFeatures, SparseGraph};
use crate::smoothing::SparseNoiseConfig;

/// Graphs up to this many nodes get a fully materialized upper-triangle
/// score block; larger graphs fall back to per-node candidate lists.
pub const DEFAULT_DENSE_LIMIT: usize = 4000;
pub const DEFAULT_CANDIDATE_K: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Jaccard,
    Fae,
    Sim,
}

/// Learned edge-embedding augmenter weights: per-node embedding
/// z = ReLU(x w2) w1, pair score sigmoid(z_u . z_v).
#[derive(Debug, Clone, PartialEq)]
pub struct FaeParams {
    pub w2: Array2<f64>, // d x h2
    pub w1: Array2<f64>, // h2 x e
}

/// Multi-head weighted-cosine augmenter: m weight vectors of length d,
/// pair score (1/m) sum_q cos(w_q o x_u, w_q o x_v).
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AugmenterParams {
    Jaccard,
    Fae(FaeParams),
    Sim(SimParams),
}

impl AugmenterParams {
    pub fn kind(&self) -> ScoreKind {
        match self {
            AugmenterParams::Jaccard => ScoreKind::Jaccard,
            AugmenterParams::Fae(_) => ScoreKind::Fae,
            AugmenterParams::Sim(_) => ScoreKind::Sim,
        }
    }
}

/// Exact pair scorer retained alongside any cached storage so
/// arbitrary pairs can always be scored.
enum ExactScorer {
    Jaccard { feats: Arc<SparseFeatures> },
    Fae { emb: Array2<f64> },
    Sim { feats: Arc<SparseFeatures>, wsq: Vec<Vec<f64>>, norms: Vec<Vec<f64>> },
}

impl ExactScorer {
    fn score(&self, u: u32, v: u32) -> f64 {
        match self {
            ExactScorer::Jaccard { feats } => {
                let inter = sparse_dot(feats, u, v);
                let union = feats.row_nnz(u) as f64 + feats.row_nnz(v) as f64 - inter;
                if union == 0.0 {
                    0.0
                } else {
                    inter / union
                }
            }
            ExactScorer::Fae { emb } => sigmoid(emb.row(u as usize).dot(&emb.row(v as usize))),
            ExactScorer::Sim { feats, wsq, norms } => {
                let m = wsq.len();
                let mut total = 0.0;
                for q in 0..m {
                    let (a, b) = (norms[q][u as usize], norms[q][v as usize]);
                    if a == 0.0 || b == 0.0 {
                        continue; // zero-vector cosine defined as 0
                    }
                    total += weighted_sparse_dot(feats, u, v, &wsq[q]) / (a * b);
                }
                total / m as f64
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Dot product of two sparse feature rows (sorted-merge).
fn sparse_dot(f: &SparseFeatures, u: u32, v: u32) -> f64 {
    let (du, vu) = f.row(u);
    let (dv, vv) = f.row(v);
    let (mut i, mut j, mut acc) = (0usize, 0usize, 0.0f64);
    while i < du.len() && j < dv.len() {
        match du[i].cmp(&dv[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += vu[i] * vv[j];
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Sum over shared dims of w2[j] * x_u[j] * x_v[j].
fn weighted_sparse_dot(f: &SparseFeatures, u: u32, v: u32, wsq: &[f64]) -> f64 {
    let (du, vu) = f.row(u);
    let (dv, vv) = f.row(v);
    let (mut i, mut j, mut acc) = (0usize, 0usize, 0.0f64);
    while i < du.len() && j < dv.len() {
        match du[i].cmp(&dv[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += wsq[du[i] as usize] * vu[i] * vv[j];
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Feature-derived symmetric pair scores. Dense storage keeps the
/// upper triangle explicitly; candidate storage keeps per-node top-k
/// pairs (additions can only come from candidates) plus the exact
/// scorer for arbitrary lookups.
pub struct EdgeScoreMatrix {
    n: usize,
    kind: ScoreKind,
    scorer: ExactScorer,
    dense: Option<Vec<f64>>,
    candidates: Option<Vec<(u32, u32, f64)>>,
}

fn tri_index(n: usize, u: u32, v: u32) -> usize {
    let (u, v) = (u.min(v) as usize, u.max(v) as usize);
    u * n - u * (u + 1) / 2 + (v - u - 1)
}

impl EdgeScoreMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    /// Symmetric pair score; diagonal scores 0.
    pub fn score(&self, u: u32, v: u32) -> f64 {
        if u == v {
            return 0.0;
        }
        match &self.dense {
            Some(d) => d[tri_index(self.n, u, v)],
            None => self.scorer.score(u, v),
        }
    }

    /// Pairs scoring strictly above `threshold`, canonical order.
    pub fn pairs_above(&self, threshold: f64) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        match (&self.dense, &self.candidates) {
            (Some(d), _) => {
                let mut idx = 0usize;
                for u in 0..self.n as u32 {
                    for v in (u + 1)..self.n as u32 {
                        if d[idx] > threshold {
                            out.push((u, v));
                        }
                        idx += 1;
                    }
                }
            }
            (None, Some(cand)) => {
                for &(u, v, s) in cand {
                    if s > threshold {
                        out.push((u, v));
                    }
                }
                out.sort_unstable();
            }
            (None, None) => unreachable!("score matrix has no storage"),
        }
        out
    }

    /// Distribution of all unordered pair scores. Candidate storage
    /// treats non-candidate pairs as mass at score 0.
    fn all_pairs_dist(&self) -> ScoreDist {
        let total = self.n * (self.n - 1) / 2;
        match (&self.dense, &self.candidates) {
            (Some(d), _) => {
                let mut vals = d.clone();
                vals.sort_unstable_by(f64::total_cmp);
                ScoreDist { vals, zeros: 0.0 }
            }
            (None, Some(cand)) => {
                let mut vals: Vec<f64> = cand.iter().map(|&(_, _, s)| s).collect();
                vals.sort_unstable_by(f64::total_cmp);
                let zeros = (total - vals.len()) as f64;
                ScoreDist { vals, zeros }
            }
            (None, None) => unreachable!(),
        }
    }
}

impl PairScorer for EdgeScoreMatrix {
    fn pair_score(&self, u: u32, v: u32) -> f64 {
        self.score(u, v)
    }
}

/// Weighted score distribution with an optional point mass at 0
/// (non-candidate pairs under top-k storage).
struct ScoreDist {
    vals: Vec<f64>, // sorted ascending
    zeros: f64,
}

impl ScoreDist {
    fn total(&self) -> f64 {
        self.vals.len() as f64 + self.zeros
    }

    fn count_leq(&self, t: f64) -> f64 {
        let c = self.vals.partition_point(|&v| v <= t) as f64;
        if t >= 0.0 {
            c + self.zeros
        } else {
            c
        }
    }

    fn count_gt(&self, t: f64) -> f64 {
        self.total() - self.count_leq(t)
    }

    /// Sorted unique support values (including the zero atom).
    fn support(&self) -> Vec<f64> {
        let mut s = self.vals.clone();
        if self.zeros > 0.0 {
            s.push(0.0);
        }
        s.sort_unstable_by(f64::total_cmp);
        s.dedup();
        s
    }
}

/// Prune/add thresholds with the expected rewiring volumes that
/// produced them. Counts follow the adjacency-matrix convention
/// (each undirected edge contributes two entries).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThresholdPair {
    pub tau: f64,
    pub xi: f64,
    pub add_count: u64,
    pub del_count: u64,
}

impl ThresholdPair {
    /// Sentinels: prune nothing, add nothing.
    pub fn identity() -> Self {
        Self { tau: f64::NEG_INFINITY, xi: f64::INFINITY, add_count: 0, del_count: 0 }
    }
}

/// Threshold selection calibrated to the noise level. ADD = floor(E' p-)
/// entries should be re-added and DEL = floor((n^2 - E') p+) pruned,
/// with E' = e_ratio n^2 the expected (directed) edge count. The rank
/// statistics are taken over the EXPECTED noisy edge and non-edge score
/// populations: a noisy edge's score is distributed as a (1-p-)/p+
/// mixture of true-edge and uniform-pair scores, so a single threshold
/// computed here prunes ~DEL and re-adds ~ADD entries per sample
/// without any per-sample rank selection.
pub fn noise_adaptive_thresholds(
    scores: &EdgeScoreMatrix,
    g_test: &SparseGraph,
    e_ratio: f64,
    cfg: &SparseNoiseConfig,
) -> Result<ThresholdPair> {
    cfg.validate()?;
    if scores.n() != g_test.n() {
        return Err(Error::Shape(format!(
            "score matrix over {} nodes, graph has {}",
            scores.n(),
            g_test.n()
        )));
    }
    let n = g_test.n() as f64;
    let e_prime = e_ratio * n * n;
    let add = (e_prime * cfg.p_minus).floor().max(0.0) as u64;
    let del = ((n * n - e_prime) * cfg.p_plus).floor().max(0.0) as u64;

    let mut edge_vals: Vec<f64> = g_test
        .edges()
        .iter()
        .map(|&(u, v)| scores.score(u, v))
        .collect();
    edge_vals.sort_unstable_by(f64::total_cmp);
    let edges = ScoreDist { vals: edge_vals, zeros: 0.0 };
    let all = scores.all_pairs_dist();
    // non-edges = all pairs minus the graph's edges (score-wise this
    // subtraction is only exact for dense storage; candidate storage
    // approximates edges outside the candidate set as zeros)
    let ne_count = all.total() - edges.total();

    // undirected targets (matrix entries count both directions)
    let add_u = add as f64 / 2.0;
    let del_u = del as f64 / 2.0;

    let tau = if del == 0 {
        f64::NEG_INFINITY
    } else {
        // expected noisy-edge mass at or below t:
        //   (1 - p_minus) * edges_leq(t) + p_plus * nonedges_leq(t)
        let noisy_leq = |t: f64| {
            (1.0 - cfg.p_minus) * edges.count_leq(t)
                + cfg.p_plus * (all.count_leq(t) - edges.count_leq(t))
        };
        let total_noisy = (1.0 - cfg.p_minus) * edges.total() + cfg.p_plus * ne_count;
        if del_u >= total_noisy {
            log::warn!("DEL={del} exceeds the expected noisy edge count; pruning everything");
            f64::INFINITY
        } else {
            let support = all.support();
            let idx = support.partition_point(|&t| noisy_leq(t) < del_u);
            support.get(idx).copied().unwrap_or(f64::INFINITY)
        }
    };

    let xi = if add == 0 {
        f64::INFINITY
    } else {
        // expected noisy-non-edge mass strictly above t:
        //   p_minus * edges_gt(t) + (1 - p_plus) * nonedges_gt(t)
        let absent_gt = |t: f64| {
            cfg.p_minus * edges.count_gt(t)
                + (1.0 - cfg.p_plus) * (all.count_gt(t) - edges.count_gt(t))
        };
        let total_absent = cfg.p_minus * edges.total() + (1.0 - cfg.p_plus) * ne_count;
        if add_u >= total_absent {
            log::warn!("ADD={add} exceeds the expected absent pair count; adding all candidates");
            f64::NEG_INFINITY
        } else {
            let support = all.support();
            let idx = support.partition_point(|&t| absent_gt(t) > add_u);
            support.get(idx).copied().unwrap_or(f64::INFINITY)
        }
    };

    Ok(ThresholdPair { tau, xi, add_count: add, del_count: del })
}

/// Threshold selection for hash-partition voting: subgraphs lose
/// edges but never gain any, so pruning is disabled and the addition
/// budget replaces the expected partition loss E' (1 - 1/T_s). The
/// rank is taken over the full pair-score distribution.
pub fn gnncert_threshold(
    scores: &EdgeScoreMatrix,
    n_test: usize,
    e_ratio: f64,
    t_s: usize,
) -> Result<ThresholdPair> {
    if t_s < 1 {
        return Err(Error::Config("partition group count must be >= 1".into()));
    }
    let n = n_test as f64;
    let e_prime = e_ratio * n * n;
    let add = (e_prime * (1.0 - 1.0 / t_s as f64)).floor().max(0.0) as u64;
    let xi = if add == 0 {
        f64::INFINITY
    } else {
        let all = scores.all_pairs_dist();
        let add_u = add as f64 / 2.0;
        if add_u >= all.total() {
            log::warn!("ADD={add} exceeds the pair count; adding all candidates");
            f64::NEG_INFINITY
        } else {
            let support = all.support();
            let idx = support.partition_point(|&t| all.count_gt(t) > add_u);
            support.get(idx).copied().unwrap_or(f64::INFINITY)
        }
    };
    Ok(ThresholdPair { tau: f64::NEG_INFINITY, xi, add_count: add, del_count: 0 })
}

/// A' = A o (S > tau) + (A = 0) o (S > xi): prune low-scoring edges,
/// add high-scoring absent pairs.
pub fn rewire(g: &SparseGraph, scores: &EdgeScoreMatrix, th: &ThresholdPair) -> SparseGraph {
    let additions = if th.xi == f64::INFINITY {
        Vec::new()
    } else {
        scores.pairs_above(th.xi)
    };
    rewire_with_additions(g, scores, th.tau, &additions)
}

fn rewire_with_additions(
    g: &SparseGraph,
    scores: &EdgeScoreMatrix,
    tau: f64,
    additions: &[(u32, u32)],
) -> SparseGraph {
    let mut kept: Vec<(u32, u32)> = if tau == f64::NEG_INFINITY {
        g.edges().to_vec()
    } else {
        g.edges()
            .iter()
            .copied()
            .filter(|&(u, v)| scores.score(u, v) > tau)
            .collect()
    };
    let before = kept.len();
    kept.extend(additions.iter().copied().filter(|&(u, v)| !g.has_edge(u, v)));
    if kept.len() > before {
        kept.sort_unstable();
    }
    g.with_canonical_edges(kept)
}

/// Rewiring with the addition candidates enumerated once; the per-call
/// cost is O(edges + candidates), which is what the sampling hot loop
/// needs.
pub struct Rewirer {
    scores: Arc<EdgeScoreMatrix>,
    thresholds: ThresholdPair,
    additions: Vec<(u32, u32)>,
}

impl Rewirer {
    pub fn new(scores: Arc<EdgeScoreMatrix>, thresholds: ThresholdPair) -> Self {
        let additions = if thresholds.xi == f64::INFINITY {
            Vec::new()
        } else {
            scores.pairs_above(thresholds.xi)
        };
        Self { scores, thresholds, additions }
    }

    pub fn thresholds(&self) -> &ThresholdPair {
        &self.thresholds
    }

    pub fn scores(&self) -> &EdgeScoreMatrix {
        &self.scores
    }

    pub fn rewire(&self, g: &SparseGraph) -> SparseGraph {
        rewire_with_additions(g, &self.scores, self.thresholds.tau, &self.additions)
    }
}

/// J_{u,v} = x_u . x_v / (|x_u| + |x_v| - x_u . x_v) for binary
/// features. Pairs with no shared support score 0.
pub fn jaccard_scores(g: &SparseGraph, candidate_k: usize) -> Result<EdgeScoreMatrix> {
    jaccard_scores_with(g, candidate_k, DEFAULT_DENSE_LIMIT)
}

pub fn jaccard_scores_with(
    g: &SparseGraph,
    candidate_k: usize,
    dense_limit: usize,
) -> Result<EdgeScoreMatrix> {
    if !g.features().binary() {
        return Err(Error::Config(
            "Jaccard scoring needs binary features (binarize the dataset first)".into(),
        ));
    }
    let scorer = ExactScorer::Jaccard { feats: g.features_arc() };
    build_matrix(g, ScoreKind::Jaccard, scorer, candidate_k, dense_limit)
}

/// Embedding scores F_{u,v} = sigmoid(z_u . z_v), z = ReLU(X w2) w1.
pub fn fae_scores(g: &SparseGraph, params: &FaeParams, candidate_k: usize) -> Result<EdgeScoreMatrix> {
    fae_scores_with(g, params, candidate_k, DEFAULT_DENSE_LIMIT)
}

pub fn fae_scores_with(
    g: &SparseGraph,
    params: &FaeParams,
    candidate_k: usize,
    dense_limit: usize,
) -> Result<EdgeScoreMatrix> {
    if params.w2.nrows() != g.features().dim() {
        return Err(Error::Shape(format!(
            "augmenter trained on {} feature dims, graph has {}",
            params.w2.nrows(),
            g.features().dim()
        )));
    }
    if params.w2.ncols() != params.w1.nrows() || params.w1.ncols() == 0 {
        return Err(Error::Config("augmenter parameters are empty or inconsistent".into()));
    }
    let mut h = feat_mul(g.features(), &params.w2);
    crate::classify::relu_inplace(&mut h);
    let emb = h.dot(&params.w1);
    build_matrix(g, ScoreKind::Fae, ExactScorer::Fae { emb }, candidate_k, dense_limit)
}

/// Multi-head weighted cosine S_{u,v} = (1/m) sum_q cos(w_q o x_u, w_q o x_v).
pub fn sim_scores(g: &SparseGraph, params: &SimParams, candidate_k: usize) -> Result<EdgeScoreMatrix> {
    sim_scores_with(g, params, candidate_k, DEFAULT_DENSE_LIMIT)
}

pub fn sim_scores_with(
    g: &SparseGraph,
    params: &SimParams,
    candidate_k: usize,
    dense_limit: usize,
) -> Result<EdgeScoreMatrix> {
    if params.weights.is_empty() {
        return Err(Error::Config("similarity augmenter has no heads".into()));
    }
    let d = g.features().dim();
    for w in &params.weights {
        if w.len() != d {
            return Err(Error::Shape(format!(
                "augmenter head has {} weights, graph has {d} feature dims",
                w.len()
            )));
        }
    }
    let wsq: Vec<Vec<f64>> = params
        .weights
        .iter()
        .map(|w| w.iter().map(|&x| x * x).collect())
        .collect();
    let norms: Vec<Vec<f64>> = wsq
        .iter()
        .map(|wq| {
            (0..g.n() as u32)
                .map(|u| {
                    let (dims, vals) = g.features().row(u);
                    dims.iter()
                        .zip(vals)
                        .map(|(&j, &v)| wq[j as usize] * v * v)
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    let scorer = ExactScorer::Sim { feats: g.features_arc(), wsq, norms };
    build_matrix(g, ScoreKind::Sim, scorer, candidate_k, dense_limit)
}

fn build_matrix(
    g: &SparseGraph,
    kind: ScoreKind,
    scorer: ExactScorer,
    candidate_k: usize,
    dense_limit: usize,
) -> Result<EdgeScoreMatrix> {
    let n = g.n();
    if n <= dense_limit {
        let mut dense = vec![0.0f64; n * (n - 1) / 2];
        // pairs with shared feature support are found via an inverted
        // index; everything else scores 0 for jaccard/sim. The fae
        // sigmoid never vanishes, so it fills every pair.
        match &scorer {
            ExactScorer::Fae { emb } => {
                let mut idx = 0usize;
                for u in 0..n {
                    let zu = emb.row(u);
                    for v in (u + 1)..n {
                        dense[idx] = sigmoid(zu.dot(&emb.row(v)));
                        idx += 1;
                    }
                }
            }
            _ => {
                for (u, v) in overlapping_pairs(g.features()) {
                    dense[tri_index(n, u, v)] = scorer.score(u, v);
                }
            }
        }
        Ok(EdgeScoreMatrix { n, kind, scorer, dense: Some(dense), candidates: None })
    } else {
        let mut pairs: Vec<(u32, u32, f64)> = Vec::new();
        let mut per_node: Vec<Vec<(f64, u32)>> = vec![Vec::new(); n];
        match &scorer {
            ExactScorer::Fae { emb } => {
                for u in 0..n {
                    let zu = emb.row(u);
                    let mut best: Vec<(f64, u32)> = (0..n as u32)
                        .filter(|&v| v as usize != u)
                        .map(|v| (sigmoid(zu.dot(&emb.row(v as usize))), v))
                        .collect();
                    best.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
                    best.truncate(candidate_k);
                    per_node[u] = best;
                }
            }
            _ => {
                for (u, v) in overlapping_pairs(g.features()) {
                    let s = scorer.score(u, v);
                    per_node[u as usize].push((s, v));
                    per_node[v as usize].push((s, u));
                }
                for list in &mut per_node {
                    list.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
                    list.truncate(candidate_k);
                }
            }
        }
        for (u, list) in per_node.iter().enumerate() {
            for &(s, v) in list {
                let (a, b) = ((u as u32).min(v), (u as u32).max(v));
                pairs.push((a, b, s));
            }
        }
        pairs.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        pairs.dedup_by_key(|p| (p.0, p.1));
        Ok(EdgeScoreMatrix { n, kind, scorer, dense: None, candidates: Some(pairs) })
    }
}

/// All unordered pairs of nodes sharing at least one feature dim,
/// produced once each, via an inverted index over dims.
fn overlapping_pairs(f: &SparseFeatures) -> Vec<(u32, u32)> {
    let mut by_dim: Vec<Vec<u32>> = vec![Vec::new(); f.dim()];
    for (u, j, v) in f.triplets() {
        if v != 0.0 {
            by_dim[j as usize].push(u);
        }
    }
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for nodes in &by_dim {
        for (i, &u) in nodes.iter().enumerate() {
            for &v in &nodes[i + 1..] {
                pairs.push((u.min(v), u.max(v)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn graph_with_features(n: usize, d: usize, triplets: Vec<(u32, u32, f64)>, edges: &[(u32, u32)]) -> SparseGraph {
        let feats = Arc::new(SparseFeatures::from_triplets(n, d, triplets).unwrap());
        SparseGraph::from_edges(feats, edges.iter().copied(), None, None).unwrap()
    }

    #[test]
    fn jaccard_identical_supports_score_one() {
        let g = graph_with_features(
            2,
            3,
            vec![(0, 0, 1.0), (0, 2, 1.0), (1, 0, 1.0), (1, 2, 1.0)],
            &[],
        );
        let s = jaccard_scores(&g, 10).unwrap();
        assert_abs_diff_eq!(s.score(0, 1), 1.0);
    }

    #[test]
    fn jaccard_disjoint_supports_score_zero() {
        let g = graph_with_features(2, 4, vec![(0, 0, 1.0), (1, 3, 1.0)], &[]);
        let s = jaccard_scores(&g, 10).unwrap();
        assert_eq!(s.score(0, 1), 0.0);
    }

    #[test]
    fn jaccard_hand_example() {
        // x_0 = (1,1,0), x_1 = (1,0,1): intersection 1, union 3
        let g = graph_with_features(
            2,
            3,
            vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0)],
            &[],
        );
        let s = jaccard_scores(&g, 10).unwrap();
        assert_abs_diff_eq!(s.score(0, 1), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn jaccard_rejects_non_binary_features() {
        let g = graph_with_features(2, 2, vec![(0, 0, 0.5), (1, 0, 1.0)], &[]);
        assert!(jaccard_scores(&g, 10).is_err());
    }

    #[test]
    fn fae_orthogonal_embeddings_score_half() {
        // identity features and weights built so z_0 _|_ z_1
        let g = graph_with_features(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)], &[]);
        let params = FaeParams {
            w2: Array2::eye(2),
            w1: Array2::eye(2), // z_u = e_u (ReLU of identity rows)
        };
        let s = fae_scores(&g, &params, 10).unwrap();
        assert_abs_diff_eq!(s.score(0, 1), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn fae_aligned_embeddings_saturate() {
        // both nodes share the single active feature: z_0 = z_1, |z|^2 = 10
        let g = graph_with_features(2, 1, vec![(0, 0, 1.0), (1, 0, 1.0)], &[]);
        let params = FaeParams {
            w2: Array2::from_elem((1, 1), 10.0f64.sqrt()),
            w1: Array2::eye(1),
        };
        let s = fae_scores(&g, &params, 10).unwrap();
        assert_abs_diff_eq!(s.score(0, 1), 1.0 / (1.0 + (-10.0f64).exp()), epsilon = 1e-12);
    }

    #[test]
    fn fae_dense_matches_exact_scorer() {
        let g = graph_with_features(
            5,
            3,
            vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (3, 0, 1.0), (3, 1, 1.0), (4, 2, 1.0)],
            &[],
        );
        let params = FaeParams {
            w2: Array2::from_shape_fn((3, 4), |(i, j)| ((i + 2 * j) as f64).sin()),
            w1: Array2::from_shape_fn((4, 2), |(i, j)| ((i as f64) - (j as f64)) * 0.3),
        };
        let dense = fae_scores_with(&g, &params, 10, 100).unwrap();
        let topk = fae_scores_with(&g, &params, 10, 0).unwrap();
        for u in 0..5u32 {
            for v in (u + 1)..5 {
                assert_abs_diff_eq!(dense.score(u, v), topk.score(u, v), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn sim_identical_features_score_one() {
        let g = graph_with_features(
            2,
            3,
            vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)],
            &[],
        );
        let params = SimParams { weights: vec![vec![0.7, 1.3, 0.2]; 2] };
        let s = sim_scores(&g, &params, 10).unwrap();
        assert_abs_diff_eq!(s.score(0, 1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sim_zero_vector_scores_zero() {
        let g = graph_with_features(2, 2, vec![(0, 0, 1.0)], &[]);
        let params = SimParams { weights: vec![vec![1.0, 1.0]] };
        let s = sim_scores(&g, &params, 10).unwrap();
        assert_eq!(s.score(0, 1), 0.0);
    }

    #[test]
    fn sim_two_heads_average_hand_example() {
        // x_0 = (1,1,0), x_1 = (1,0,1)
        let g = graph_with_features(
            2,
            3,
            vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0)],
            &[],
        );
        let params = SimParams { weights: vec![vec![1.0, 1.0, 1.0], vec![2.0, 1.0, 1.0]] };
        // head 1: cos = 1 / (sqrt2 * sqrt2) = 0.5
        // head 2: num = 4, norms sqrt5, sqrt5 -> 0.8
        let s = sim_scores(&g, &params, 10).unwrap();
        assert_abs_diff_eq!(s.score(0, 1), (0.5 + 0.8) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn threshold_arithmetic_example() {
        // 4 nodes, 4 undirected edges (nnz = 8), e_ratio = 0.5,
        // p- = 0.5, p+ = 0.25 -> E' = 8, ADD = 4, DEL = 2
        let g = graph_with_features(
            4,
            4,
            (0..4).map(|u| (u, u, 1.0)).collect(),
            &[(0, 1), (1, 2), (2, 3), (3, 0)],
        );
        let s = jaccard_scores(&g, 10).unwrap();
        let cfg = SparseNoiseConfig { p_plus: 0.25, p_minus: 0.5, seed: 0 };
        let th = noise_adaptive_thresholds(&s, &g, 0.5, &cfg).unwrap();
        assert_eq!(th.add_count, 4);
        assert_eq!(th.del_count, 2);
    }

    #[test]
    fn zero_noise_gives_sentinels_and_identity_rewire() {
        let g = graph_with_features(
            3,
            3,
            (0..3).map(|u| (u, u, 1.0)).collect(),
            &[(0, 1), (1, 2)],
        );
        let s = jaccard_scores(&g, 10).unwrap();
        let cfg = SparseNoiseConfig { p_plus: 0.0, p_minus: 0.0, seed: 0 };
        let th = noise_adaptive_thresholds(&s, &g, 0.4, &cfg).unwrap();
        assert_eq!(th.tau, f64::NEG_INFINITY);
        assert_eq!(th.xi, f64::INFINITY);
        let r = rewire(&g, &s, &th);
        assert_eq!(r.edges(), g.edges());
    }

    #[test]
    fn raising_p_plus_never_decreases_del() {
        let g = graph_with_features(
            4,
            4,
            (0..4).map(|u| (u, u, 1.0)).collect(),
            &[(0, 1), (2, 3)],
        );
        let s = jaccard_scores(&g, 10).unwrap();
        let mut prev = 0u64;
        for i in 0..=10 {
            let cfg = SparseNoiseConfig { p_plus: i as f64 / 10.0, p_minus: 0.3, seed: 0 };
            let th = noise_adaptive_thresholds(&s, &g, 0.25, &cfg).unwrap();
            assert!(th.del_count >= prev);
            prev = th.del_count;
        }
    }

    #[test]
    fn gnncert_threshold_arithmetic() {
        let g = graph_with_features(
            10,
            10,
            (0..10).map(|u| (u, u, 1.0)).collect(),
            &[(0, 1)],
        );
        let s = jaccard_scores(&g, 10).unwrap();
        // E' = e_ratio * 100 = 100 when e_ratio = 1.0; T_s = 20 -> ADD = 95
        let th = gnncert_threshold(&s, 10, 1.0, 20).unwrap();
        assert_eq!(th.add_count, 95);
        assert_eq!(th.tau, f64::NEG_INFINITY);
        // T_s = 1 -> no loss, identity
        let th1 = gnncert_threshold(&s, 10, 1.0, 1).unwrap();
        assert_eq!(th1.add_count, 0);
        assert_eq!(th1.xi, f64::INFINITY);
    }

    /// 4-node hand example: one high-scoring missing edge gets added,
    /// one low-scoring present edge gets pruned.
    #[test]
    fn rewire_swaps_hand_built_scores() {
        let g = graph_with_features(
            4,
            4,
            (0..4).map(|u| (u, u, 1.0)).collect(),
            &[(0, 1), (2, 3)],
        );
        // build a dense score matrix by hand: (0,1) scores 0.1 (present,
        // pruned), (1,2) scores 0.9 (absent, added), everything else 0.3
        let n = 4;
        let mut dense = vec![0.3f64; n * (n - 1) / 2];
        dense[tri_index(n, 0, 1)] = 0.1;
        dense[tri_index(n, 1, 2)] = 0.9;
        let scores = EdgeScoreMatrix {
            n,
            kind: ScoreKind::Jaccard,
            scorer: ExactScorer::Jaccard { feats: g.features_arc() },
            dense: Some(dense),
            candidates: None,
        };
        let th = ThresholdPair { tau: 0.5, xi: 0.5, add_count: 2, del_count: 2 };
        let r = rewire(&g, &scores, &th);
        assert_eq!(r.edges(), &[(1, 2)]);
    }

    #[test]
    fn rewire_total_prune() {
        let g = graph_with_features(
            3,
            3,
            (0..3).map(|u| (u, u, 1.0)).collect(),
            &[(0, 1), (1, 2), (0, 2)],
        );
        let s = jaccard_scores(&g, 10).unwrap();
        let th = ThresholdPair { tau: 2.0, xi: f64::INFINITY, add_count: 0, del_count: 6 };
        assert_eq!(rewire(&g, &s, &th).edge_count(), 0);
    }

    #[test]
    fn rewire_is_idempotent_when_tau_leq_xi() {
        let g = graph_with_features(
            6,
            4,
            vec![(0, 0, 1.0), (1, 0, 1.0), (2, 1, 1.0), (3, 1, 1.0), (4, 2, 1.0), (5, 2, 1.0)],
            &[(0, 2), (1, 3), (0, 1), (4, 5)],
        );
        let s = jaccard_scores(&g, 10).unwrap();
        let th = ThresholdPair { tau: 0.2, xi: 0.8, add_count: 2, del_count: 2 };
        let once = rewire(&g, &s, &th);
        let twice = rewire(&once, &s, &th);
        assert_eq!(once.edges(), twice.edges());
    }

    #[test]
    fn rewirer_matches_one_shot_rewire() {
        let g = graph_with_features(
            5,
            3,
            vec![(0, 0, 1.0), (1, 0, 1.0), (2, 1, 1.0), (3, 1, 1.0), (4, 2, 1.0)],
            &[(0, 3), (1, 2)],
        );
        let s = Arc::new(jaccard_scores(&g, 10).unwrap());
        let th = ThresholdPair { tau: 0.1, xi: 0.5, add_count: 2, del_count: 2 };
        let fast = Rewirer::new(Arc::clone(&s), th);
        assert_eq!(fast.rewire(&g).edges(), rewire(&g, &s, &th).edges());
    }
}
