//! Stochastic-block-model fixture generator with class-signature
//! binary features.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SparseFeatures, SparseGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SbmConfig {
    pub classes: usize,
    pub nodes_per_class: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_signal: f64,
    pub seed: u64,
}

/// Generate an SBM graph: same-class pairs connect with `p_in`,
/// cross-class with `p_out`. Feature dims are partitioned into one
/// signature block per class; a node activates its own block's dims
/// with probability `feature_signal` and background dims with the
/// scaled-down probability 0.5 * (1 - feature_signal). External node
/// ids are the decimal node indices. Deterministic given `seed`.
pub fn generate_sbm(
    classes: usize,
    nodes_per_class: usize,
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    feature_signal: f64,
    seed: u64,
) -> Result<SparseGraph> {
    if !(0.0..=1.0).contains(&p_out) || !(0.0..=1.0).contains(&p_in) || p_out > p_in {
        return Err(Error::Config(format!("need 0 <= p_out <= p_in <= 1, got {p_out}, {p_in}")));
    }
    if !(0.0..=1.0).contains(&feature_signal) {
        return Err(Error::Config(format!("feature_signal {feature_signal} not in [0, 1]")));
    }
    if classes == 0 || nodes_per_class == 0 || feature_dim < classes {
        return Err(Error::Config("need classes >= 1, nodes per class >= 1, feature_dim >= classes".into()));
    }
    let n = classes * nodes_per_class;
    let class_of = |u: usize| (u / nodes_per_class) as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if class_of(u) == class_of(v) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u as u32, v as u32));
            }
        }
    }

    let block = feature_dim / classes;
    let p_background = 0.5 * (1.0 - feature_signal);
    let mut triplets = Vec::new();
    for u in 0..n {
        let c = class_of(u) as usize;
        for j in 0..feature_dim {
            // signature block of class c is dims [c*block, (c+1)*block);
            // dims beyond classes*block are background for everyone
            let in_signature = j < block * classes && j / block == c;
            let p = if in_signature { feature_signal } else { p_background };
            if rng.random::<f64>() < p {
                triplets.push((u as u32, j as u32, 1.0));
            }
        }
    }
    let features = SparseFeatures::from_triplets(n, feature_dim, triplets)?;
    let labels: Vec<u32> = (0..n).map(|u| class_of(u)).collect();
    let ids: Vec<String> = (0..n).map(|u| u.to_string()).collect();
    SparseGraph::from_edges(
        Arc::new(features),
        edges,
        Some(Arc::new(labels)),
        Some(Arc::new(ids)),
    )
}
