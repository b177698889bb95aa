//! Inductive node split: labeled/unlabeled training, validation and
//! test sets with nested train ⊂ val ⊂ test graphs.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SparseGraph;
use crate::error::{Error, Result};

/// Pairwise-disjoint node sets covering the whole graph. The training
/// graph is the induced subgraph on labeled ∪ unlabeled train nodes;
/// the validation graph adds validation nodes; the test graph adds
/// test nodes (nested node sets).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InductiveSplit {
    pub labeled_train: Vec<u32>,
    pub unlabeled_train: Vec<u32>,
    pub validation: Vec<u32>,
    pub test: Vec<u32>,
}

impl InductiveSplit {
    pub(crate) fn sort(&mut self) {
        self.labeled_train.sort_unstable();
        self.unlabeled_train.sort_unstable();
        self.validation.sort_unstable();
        self.test.sort_unstable();
    }

    /// Training-graph node set (sorted): labeled ∪ unlabeled train.
    pub fn train_nodes(&self) -> Vec<u32> {
        let mut v = [self.labeled_train.clone(), self.unlabeled_train.clone()].concat();
        v.sort_unstable();
        v
    }

    /// Validation-graph node set (sorted): train ∪ validation.
    pub fn validation_nodes(&self) -> Vec<u32> {
        let mut v = self.train_nodes();
        v.extend_from_slice(&self.validation);
        v.sort_unstable();
        v
    }

    /// Test-graph node set (sorted): all nodes.
    pub fn test_nodes(&self) -> Vec<u32> {
        let mut v = self.validation_nodes();
        v.extend_from_slice(&self.test);
        v.sort_unstable();
        v
    }

    /// Check disjointness and coverage of all `n` nodes.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        let mut total = 0usize;
        for set in [&self.labeled_train, &self.unlabeled_train, &self.validation, &self.test] {
            for &u in set {
                if u as usize >= n {
                    return Err(Error::NodeOutOfBounds { id: u as u64, n });
                }
                if seen[u as usize] {
                    return Err(Error::Split(format!("node {u} appears in two sets")));
                }
                seen[u as usize] = true;
                total += 1;
            }
        }
        if total != n {
            return Err(Error::Split(format!("split covers {total} of {n} nodes")));
        }
        Ok(())
    }
}

/// Stratified inductive split: `per_class_labeled` nodes per class go
/// to labeled training and to validation, a `test_fraction` share of
/// each class to test, the remainder to unlabeled training.
/// Deterministic given `seed`.
pub fn make_inductive_split(
    g: &SparseGraph,
    per_class_labeled: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<InductiveSplit> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction == 0.0 {
        return Err(Error::Split(format!("test_fraction {test_fraction} not in (0, 1)")));
    }
    let labels = g
        .labels()
        .ok_or_else(|| Error::Split("graph has no labels".into()))?;
    let num_classes = g.num_classes();
    let mut by_class: Vec<Vec<u32>> = vec![Vec::new(); num_classes];
    for (u, &c) in labels.iter().enumerate() {
        by_class[c as usize].push(u as u32);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = InductiveSplit::default();
    for (c, nodes) in by_class.iter_mut().enumerate() {
        if nodes.len() < 2 * per_class_labeled + 1 {
            return Err(Error::Split(format!(
                "class {c} has {} nodes, needs at least {}",
                nodes.len(),
                2 * per_class_labeled + 1
            )));
        }
        nodes.shuffle(&mut rng);
        let available = nodes.len() - 2 * per_class_labeled;
        let want = (test_fraction * nodes.len() as f64).round() as usize;
        let test_count = want.clamp(1, available);
        let mut it = nodes.iter().copied();
        split.labeled_train.extend(it.by_ref().take(per_class_labeled));
        split.validation.extend(it.by_ref().take(per_class_labeled));
        split.test.extend(it.by_ref().take(test_count));
        split.unlabeled_train.extend(it);
    }
    split.sort();
    split.validate(g.n())?;
    Ok(split)
}
