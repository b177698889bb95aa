//! Graph and dataset representation: sparse undirected graphs with
//! binary node features, inductive splits, synthetic (SBM) generation,
//! and graph statistics (homophily, reconstruction AUC).

mod io;
mod sbm;
mod split;
mod stats;

pub use io::{
    load_dataset, load_dataset_with_ids, load_node_ids, load_split, save_dataset,
    save_node_ids, save_split,
};
pub use sbm::{generate_sbm, SbmConfig};
pub use split::{make_inductive_split, InductiveSplit};
pub use stats::{graph_stats, homophily, reconstruction_auc, AucInput, GraphStats, PairScorer};

use std::sync::Arc;

use crate::error::{Error, Result};

/// Sparse row-major matrix of node features. Values are expected to be
/// binary ({0, 1}) for Jaccard scoring; general non-negative reals are
/// accepted and flagged via [`SparseFeatures::binary`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFeatures {
    n: usize,
    d: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    binary: bool,
}

impl SparseFeatures {
    /// Build from (node, dim, value) triplets. Triplets may arrive in any
    /// order; duplicates within a row are rejected.
    pub fn from_triplets(n: usize, d: usize, mut triplets: Vec<(u32, u32, f64)>) -> Result<Self> {
        for &(u, j, _) in &triplets {
            if u as usize >= n {
                return Err(Error::NodeOutOfBounds { id: u as u64, n });
            }
            if j as usize >= d {
                return Err(Error::Shape(format!("feature dim {j} >= {d}")));
            }
        }
        triplets.sort_unstable_by_key(|&(u, j, _)| (u, j));
        triplets.dedup_by_key(|&mut (u, j, _)| (u, j));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for (u, j, v) in triplets {
            indptr[u as usize + 1] += 1;
            indices.push(j);
            values.push(v);
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        let binary = values.iter().all(|&v| v == 0.0 || v == 1.0);
        Ok(Self { n, d, indptr, indices, values, binary })
    }

    /// Identity features: node u has feature u set to 1 (requires d >= n).
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            d: n,
            indptr: (0..=n).collect(),
            indices: (0..n as u32).collect(),
            values: vec![1.0; n],
            binary: true,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn binary(&self) -> bool {
        self.binary
    }

    /// Sparse row: parallel slices of dims and values.
    pub fn row(&self, u: u32) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[u as usize], self.indptr[u as usize + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_nnz(&self, u: u32) -> usize {
        self.indptr[u as usize + 1] - self.indptr[u as usize]
    }

    /// Iterate (node, dim, value) triplets.
    pub fn triplets(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.n).flat_map(move |u| {
            let (dims, vals) = self.row(u as u32);
            dims.iter().zip(vals).map(move |(&j, &v)| (u as u32, j, v))
        })
    }

    /// Restrict to the given rows (new node ids follow `rows` order).
    pub fn subset(&self, rows: &[u32]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for &u in rows {
            let (dims, vals) = self.row(u);
            indices.extend_from_slice(dims);
            values.extend_from_slice(vals);
            indptr.push(indices.len());
        }
        Self { n: rows.len(), d: self.d, indptr, indices, values, binary: self.binary }
    }
}

/// Undirected, self-loop-free graph in sparse form: a sorted
/// upper-triangle edge list plus per-node sorted neighbor lists.
/// Immutable after construction; cheap to clone (features, labels and
/// external ids are shared behind `Arc`).
#[derive(Debug, Clone)]
pub struct SparseGraph {
    n: usize,
    edges: Vec<(u32, u32)>,
    neighbors: Vec<Vec<u32>>,
    features: Arc<SparseFeatures>,
    labels: Option<Arc<Vec<u32>>>,
    external_ids: Option<Arc<Vec<String>>>,
}

impl SparseGraph {
    /// Construct from an arbitrary edge list: directed edges are
    /// symmetrized, duplicates and self-loops dropped.
    pub fn from_edges(
        features: Arc<SparseFeatures>,
        raw_edges: impl IntoIterator<Item = (u32, u32)>,
        labels: Option<Arc<Vec<u32>>>,
        external_ids: Option<Arc<Vec<String>>>,
    ) -> Result<Self> {
        let n = features.n();
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Shape(format!("{} labels for {n} nodes", l.len())));
            }
        }
        if let Some(ids) = &external_ids {
            if ids.len() != n {
                return Err(Error::Shape(format!("{} external ids for {n} nodes", ids.len())));
            }
        }
        let mut edges = Vec::new();
        for (u, v) in raw_edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::NodeOutOfBounds { id: u.max(v) as u64, n });
            }
            if u == v {
                continue;
            }
            edges.push((u.min(v), u.max(v)));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_canonical(features, edges, labels, external_ids))
    }

    /// Construct from already-canonical upper-triangle edges (sorted,
    /// deduplicated, u < v, all endpoints in range). Used by the noise
    /// and rewiring hot paths which produce canonical lists by design.
    pub(crate) fn from_canonical(
        features: Arc<SparseFeatures>,
        edges: Vec<(u32, u32)>,
        labels: Option<Arc<Vec<u32>>>,
        external_ids: Option<Arc<Vec<String>>>,
    ) -> Self {
        let n = features.n();
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &edges {
            neighbors[u as usize].push(v);
            neighbors[v as usize].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Self { n, edges, neighbors, features, labels, external_ids }
    }

    /// Same node set and metadata, different edge set.
    pub fn with_edges(&self, raw_edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        Self::from_edges(
            Arc::clone(&self.features),
            raw_edges,
            self.labels.clone(),
            self.external_ids.clone(),
        )
    }

    pub(crate) fn with_canonical_edges(&self, edges: Vec<(u32, u32)>) -> Self {
        Self::from_canonical(
            Arc::clone(&self.features),
            edges,
            self.labels.clone(),
            self.external_ids.clone(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Undirected edge count.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted upper-triangle edge list (u < v).
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, u: u32) -> &[u32] {
        &self.neighbors[u as usize]
    }

    pub fn degree(&self, u: u32) -> usize {
        self.neighbors[u as usize].len()
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        if u == v {
            return false;
        }
        self.neighbors[u as usize].binary_search(&v).is_ok()
    }

    pub fn features(&self) -> &SparseFeatures {
        &self.features
    }

    pub fn features_arc(&self) -> Arc<SparseFeatures> {
        Arc::clone(&self.features)
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref().map(|v| v.as_slice())
    }

    pub fn external_ids(&self) -> Option<&[String]> {
        self.external_ids.as_deref().map(|v| v.as_slice())
    }

    pub fn set_external_ids(&mut self, ids: Vec<String>) -> Result<()> {
        if ids.len() != self.n {
            return Err(Error::Shape(format!("{} external ids for {} nodes", ids.len(), self.n)));
        }
        self.external_ids = Some(Arc::new(ids));
        Ok(())
    }

    /// Number of classes (max label + 1); 0 when unlabeled.
    pub fn num_classes(&self) -> usize {
        self.labels
            .as_deref()
            .and_then(|l| l.iter().max().map(|&m| m as usize + 1))
            .unwrap_or(0)
    }

    /// Induced subgraph on `nodes` (new ids follow `nodes` order).
    /// Returns the subgraph; `nodes[i]` is the original id of new node i.
    pub fn induced_subgraph(&self, nodes: &[u32]) -> SparseGraph {
        let mut remap = vec![u32::MAX; self.n];
        for (new, &old) in nodes.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let mut edges = Vec::new();
        for &(u, v) in &self.edges {
            let (nu, nv) = (remap[u as usize], remap[v as usize]);
            if nu != u32::MAX && nv != u32::MAX {
                edges.push((nu.min(nv), nu.max(nv)));
            }
        }
        edges.sort_unstable();
        let features = Arc::new(self.features.subset(nodes));
        let labels = self
            .labels
            .as_deref()
            .map(|l| Arc::new(nodes.iter().map(|&u| l[u as usize]).collect()));
        let external_ids = self
            .external_ids
            .as_deref()
            .map(|ids| Arc::new(nodes.iter().map(|&u| ids[u as usize].clone()).collect()));
        SparseGraph::from_canonical(features, edges, labels, external_ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(edges: &[(u32, u32)], n: usize) -> SparseGraph {
        SparseGraph::from_edges(Arc::new(SparseFeatures::identity(n)), edges.iter().copied(), None, None)
            .unwrap()
    }

    #[test]
    fn smallest_graph() {
        let g = tiny(&[(0, 1)], 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.degree(1), 1);
        assert!(g.has_edge(1, 0));
    }

    #[test]
    fn symmetrize_dedup_deloop() {
        let g = tiny(&[(0, 1), (1, 0), (1, 1)], 2);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn out_of_bounds_edge_rejected() {
        let feats = Arc::new(SparseFeatures::identity(2));
        let err = SparseGraph::from_edges(feats, [(0u32, 5u32)], None, None).unwrap_err();
        assert!(matches!(err, Error::NodeOutOfBounds { id: 5, n: 2 }));
    }

    #[test]
    fn induced_subgraph_remaps() {
        let g = tiny(&[(0, 1), (1, 2), (2, 3)], 4);
        let sub = g.induced_subgraph(&[1, 2, 3]);
        assert_eq!(sub.n(), 3);
        assert_eq!(sub.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn features_subset_keeps_rows() {
        let f = SparseFeatures::from_triplets(3, 4, vec![(0, 1, 1.0), (2, 3, 1.0), (2, 0, 1.0)])
            .unwrap();
        let s = f.subset(&[2, 0]);
        assert_eq!(s.row(0), (&[0u32, 3][..], &[1.0, 1.0][..]));
        assert_eq!(s.row(1), (&[1u32][..], &[1.0][..]));
    }
}
