//! Randomization sources: sparse edge-flip noise, MD5 hash
//! partitioning into deterministic subgraphs, and Gaussian vector
//! noise. All sampling is pure given (config, sample_index).

use std::collections::HashSet;
use std::sync::Arc;

use md5::{Digest, Md5};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::rng::substream;

/// Edge-flip noise: each non-edge appears with probability `p_plus`,
/// each edge disappears with probability `p_minus`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SparseNoiseConfig {
    pub p_plus: f64,
    pub p_minus: f64,
    pub seed: u64,
}

impl SparseNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_plus) || !(0.0..=1.0).contains(&self.p_minus) {
            return Err(Error::Config(format!(
                "noise probabilities must lie in [0, 1], got p_plus={}, p_minus={}",
                self.p_plus, self.p_minus
            )));
        }
        Ok(())
    }
}

/// Deterministic edge grouping into `t_s` subgraphs keyed by the MD5
/// hash of the concatenated external node ids.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PartitionConfig {
    pub t_s: usize,
    /// Only "md5" is supported; kept explicit so partition outputs are
    /// self-describing.
    pub hash_name: String,
}

impl PartitionConfig {
    pub fn new(t_s: usize) -> Self {
        Self { t_s, hash_name: "md5".into() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_s < 1 {
            return Err(Error::Config("partition group count must be >= 1".into()));
        }
        if self.hash_name != "md5" {
            return Err(Error::Config(format!("unsupported hash {:?}", self.hash_name)));
        }
        Ok(())
    }
}

/// Additive i.i.d. N(0, sigma^2) noise on dense vectors.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianNoiseConfig {
    pub sigma: f64,
    pub seed: u64,
}

impl GaussianNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// One noisy draw: keep each edge with probability 1 - p_minus, add
/// each absent pair with probability p_plus. Additions are sampled by
/// drawing the exact binomial count over the non-edge population and
/// placing that many uniformly without replacement, so the cost is
/// O(E + additions) rather than O(n^2). Symmetric and self-loop-free by
/// construction; deterministic given (cfg.seed, sample_index).
pub fn sample_sparse_noise(
    g: &SparseGraph,
    cfg: &SparseNoiseConfig,
    sample_index: u64,
) -> Result<SparseGraph> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, sample_index);
    let n = g.n() as u64;
    let total_pairs = n * (n - 1) / 2;
    let e = g.edge_count() as u64;
    let non_edges = total_pairs - e;

    let mut kept: Vec<(u32, u32)> = if cfg.p_minus == 0.0 {
        g.edges().to_vec()
    } else {
        g.edges()
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() >= cfg.p_minus)
            .collect()
    };

    if cfg.p_plus > 0.0 && non_edges > 0 {
        let k = Binomial::new(non_edges, cfg.p_plus)
            .map_err(|e| Error::Numeric(e.to_string()))?
            .sample(&mut rng);
        if k > non_edges / 2 {
            // dense fallback: enumerate non-edges and take a k-subset
            let mut pool: Vec<(u32, u32)> = Vec::with_capacity(non_edges as usize);
            for u in 0..n as u32 {
                for v in (u + 1)..n as u32 {
                    if !g.has_edge(u, v) {
                        pool.push((u, v));
                    }
                }
            }
            for idx in rand::seq::index::sample(&mut rng, pool.len(), k as usize) {
                kept.push(pool[idx]);
            }
        } else {
            // rejection-sample uniform non-edge pairs
            let mut chosen: HashSet<(u32, u32)> = HashSet::with_capacity(k as usize);
            while (chosen.len() as u64) < k {
                let u = rng.random_range(0..n as u32);
                let v = rng.random_range(0..n as u32);
                if u == v {
                    continue;
                }
                let pair = (u.min(v), u.max(v));
                if !g.has_edge(pair.0, pair.1) {
                    chosen.insert(pair);
                }
            }
            kept.extend(chosen);
        }
        kept.sort_unstable();
    }
    Ok(g.with_canonical_edges(kept))
}

/// Group index of an undirected edge: MD5 over the two external ids
/// concatenated with the lexicographically smaller id first, the
/// 128-bit digest read big-endian, mod `t_s`. 0-based.
pub fn edge_group(id_u: &str, id_v: &str, t_s: usize) -> usize {
    let (a, b) = if id_u <= id_v { (id_u, id_v) } else { (id_v, id_u) };
    let mut h = Md5::new();
    h.update(a.as_bytes());
    h.update(b.as_bytes());
    let digest: [u8; 16] = h.finalize().into();
    (u128::from_be_bytes(digest) % t_s as u128) as usize
}

/// Split a graph into `t_s` deterministic subgraphs on the full node
/// set; each edge lands in exactly one subgraph. Requires external
/// string ids on every node.
pub fn hash_partition(g: &SparseGraph, cfg: &PartitionConfig) -> Result<Vec<SparseGraph>> {
    cfg.validate()?;
    let ids = g
        .external_ids()
        .ok_or(Error::MissingExternalId(0))?;
    let mut groups: Vec<Vec<(u32, u32)>> = vec![Vec::new(); cfg.t_s];
    for &(u, v) in g.edges() {
        let gi = edge_group(&ids[u as usize], &ids[v as usize], cfg.t_s);
        groups[gi].push((u, v));
    }
    Ok(groups.into_iter().map(|edges| g.with_canonical_edges(edges)).collect())
}

/// x + epsilon with epsilon ~ N(0, sigma^2 I); deterministic given
/// (cfg.seed, sample_index).
pub fn sample_gaussian_noise(
    x: &[f64],
    cfg: &GaussianNoiseConfig,
    sample_index: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, sample_index);
    let normal = Normal::new(0.0, cfg.sigma).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(x.iter().map(|&xi| xi + normal.sample(&mut rng)).collect())
}

/// Keep one reference so callers outside the crate can build graphs
/// that share features with an existing one.
pub fn shared_features(g: &SparseGraph) -> Arc<crate::graph::SparseFeatures> {
    g.features_arc()
}
