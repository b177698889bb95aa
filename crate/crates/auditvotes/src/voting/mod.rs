//! Conditional vote collection.
//!
//! A smoothed prediction is a majority vote over noisy graph samples. The
//! conditional variant only counts a sample's vote for a node when a filter
//! function judges the noisy prediction trustworthy: by softmax confidence,
//! by pseudo-label homophily, or by the Jensen-Shannon divergence of the
//! neighborhood's probability vectors. Unfiltered voting is the special case
//! `FilterKind::None`.
//!
//! From the per-node tallies we form Clopper-Pearson confidence bounds on
//! the top-class probability (Bonferroni-adjusted across classes) and run an
//! exact binomial sign test to decide whether to abstain.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Binomial, ContinuousCDF, DiscreteCDF};

use crate::classify::Prediction;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;

/// Default confidence threshold for edge-deletion certification runs.
pub const DEFAULT_THETA_DELETION: f64 = 0.5;
/// Default confidence threshold for edge-addition certification runs.
pub const DEFAULT_THETA_ADDITION: f64 = 0.2;
/// Default confidence threshold for Gaussian feature-noise runs.
pub const DEFAULT_THETA_GAUSSIAN: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    None,
    Confidence,
    Homophily,
    Jsd,
}

/// The vote filter `h`: which per-node metric to compute on each noisy
/// sample, and the threshold a vote must clear to be counted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub kind: FilterKind,
    pub theta: f64,
}

impl FilterConfig {
    pub fn none() -> Self {
        Self { kind: FilterKind::None, theta: 0.0 }
    }

    pub fn confidence(theta: f64) -> Self {
        Self { kind: FilterKind::Confidence, theta }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            FilterKind::None => Ok(()),
            FilterKind::Confidence | FilterKind::Homophily => {
                if (0.0..=1.0).contains(&self.theta) {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "filter threshold {} outside [0, 1]",
                        self.theta
                    )))
                }
            }
            // The Jensen gap lives in [0, ln C]; C is unknown here so only
            // the lower end is checked.
            FilterKind::Jsd => {
                if self.theta.is_finite() && self.theta >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "jsd threshold {} must be finite and non-negative",
                        self.theta
                    )))
                }
            }
        }
    }

    /// Whether a vote with the given filter value is counted. Confidence and
    /// homophily pass strictly above theta; JSD passes strictly below (high
    /// divergence is the attack signature).
    pub fn passes(&self, value: f64) -> bool {
        match self.kind {
            FilterKind::None => true,
            FilterKind::Confidence | FilterKind::Homophily => value > self.theta,
            FilterKind::Jsd => value < self.theta,
        }
    }
}

fn entropy(p: &[f64]) -> f64 {
    p.iter().map(|&x| if x > 0.0 { -x * x.ln() } else { 0.0 }).sum()
}

/// Per-node filter metric on one noisy sample. `preds` must have been
/// computed on `g_sample` (homophily and JSD read its neighbor lists).
pub fn filter_values(
    preds: &[Prediction],
    g_sample: &SparseGraph,
    kind: FilterKind,
) -> Result<Vec<f64>> {
    if preds.len() != g_sample.n() {
        return Err(Error::Shape(format!(
            "{} predictions for a graph with {} nodes",
            preds.len(),
            g_sample.n()
        )));
    }
    let values = match kind {
        FilterKind::None => vec![0.0; preds.len()],
        FilterKind::Confidence => preds.iter().map(|p| p.confidence).collect(),
        FilterKind::Homophily => (0..preds.len())
            .map(|v| {
                let nbrs = g_sample.neighbors(v as u32);
                if nbrs.is_empty() {
                    return 0.0; // isolated nodes score zero
                }
                // closed neighborhood: the node agrees with itself, the
                // same self-loop convention the classifier aggregates with
                let same = nbrs
                    .iter()
                    .filter(|&&u| preds[u as usize].class_index == preds[v].class_index)
                    .count();
                (same + 1) as f64 / (nbrs.len() + 1) as f64
            })
            .collect(),
        FilterKind::Jsd => (0..preds.len())
            .map(|v| {
                let nbrs = g_sample.neighbors(v as u32);
                if nbrs.is_empty() {
                    return 0.0;
                }
                let c = preds[v].probability_vector.len();
                let mut mean = vec![0.0; c];
                let mut mean_h = 0.0;
                for &u in nbrs {
                    let p = &preds[u as usize].probability_vector;
                    for (m, &x) in mean.iter_mut().zip(p) {
                        *m += x;
                    }
                    mean_h += entropy(p);
                }
                let inv = 1.0 / nbrs.len() as f64;
                for m in &mut mean {
                    *m *= inv;
                }
                // Jensen gap: entropy of the mean minus mean entropy. Clamp
                // tiny negative round-off so identical neighbors give 0.
                (entropy(&mean) - mean_h * inv).max(0.0)
            })
            .collect(),
    };
    Ok(values)
}

/// Vote counts for one node across all samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    /// per-class counts of filtered-in votes
    pub counts: Vec<u64>,
    /// total filtered-in votes (= sum of `counts`)
    pub n_valid: u64,
    /// samples drawn, including filtered-out ones
    pub n_total: u64,
}

impl VoteTally {
    pub fn new(n_classes: usize) -> Self {
        Self { counts: vec![0; n_classes], n_valid: 0, n_total: 0 }
    }

    pub fn record(&mut self, class: u32, valid: bool) {
        self.n_total += 1;
        if valid {
            self.counts[class as usize] += 1;
            self.n_valid += 1;
        }
    }

    /// Associative merge of two partial tallies for the same node, so
    /// per-sample contributions can accumulate in any order across workers.
    pub fn merge(&mut self, other: &VoteTally) {
        assert_eq!(self.counts.len(), other.counts.len(), "class count mismatch");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_valid += other.n_valid;
        self.n_total += other.n_total;
    }

    /// Top two classes by count; ties break toward the smaller index. With a
    /// single class the runner-up is reported as that class with count 0.
    pub fn top_two(&self) -> (u32, u64, u32, u64) {
        let mut y_a = 0usize;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[y_a] {
                y_a = i;
            }
        }
        let mut y_b = usize::MAX;
        for (i, &c) in self.counts.iter().enumerate() {
            if i == y_a {
                continue;
            }
            if y_b == usize::MAX || c > self.counts[y_b] {
                y_b = i;
            }
        }
        if y_b == usize::MAX {
            return (y_a as u32, self.counts[y_a], y_a as u32, 0);
        }
        (y_a as u32, self.counts[y_a], y_b as u32, self.counts[y_b])
    }
}

/// Fold one noisy sample's predictions into the per-node tallies.
pub fn record_sample(
    tallies: &mut [VoteTally],
    preds: &[Prediction],
    g_sample: &SparseGraph,
    filter: &FilterConfig,
) -> Result<()> {
    if tallies.len() != preds.len() {
        return Err(Error::Shape(format!(
            "{} tallies for {} predictions",
            tallies.len(),
            preds.len()
        )));
    }
    let values = filter_values(preds, g_sample, filter.kind)?;
    for ((tally, pred), value) in tallies.iter_mut().zip(preds).zip(values) {
        tally.record(pred.class_index, filter.passes(value));
    }
    Ok(())
}

/// Tally a finished stream of per-sample predictions. Each item carries the
/// noisy graph the predictions were computed on.
pub fn tally_votes<'a, I>(
    samples: I,
    n_nodes: usize,
    n_classes: usize,
    filter: &FilterConfig,
) -> Result<Vec<VoteTally>>
where
    I: IntoIterator<Item = (Vec<Prediction>, &'a SparseGraph)>,
{
    filter.validate()?;
    let mut tallies = vec![VoteTally::new(n_classes); n_nodes];
    for (preds, g) in samples {
        record_sample(&mut tallies, &preds, g, filter)?;
    }
    Ok(tallies)
}

/// One-sided Clopper-Pearson bounds on the top-class and runner-up
/// probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityBounds {
    pub p_a_lower: f64,
    pub p_b_upper: f64,
    /// the overall level the per-class bounds were adjusted from
    pub alpha: f64,
}

/// Clopper-Pearson lower bound for `successes` out of `trials` at level
/// `level`: the Beta(k, n-k+1) quantile at `level`, 0 when k = 0.
fn cp_lower(successes: u64, trials: u64, level: f64) -> f64 {
    if successes == 0 {
        return 0.0;
    }
    let a = successes as f64;
    let b = (trials - successes) as f64 + 1.0;
    Beta::new(a, b).expect("valid Beta shape").inverse_cdf(level)
}

/// Clopper-Pearson upper bound: Beta(k+1, n-k) quantile at 1 - level, 1 when
/// k = n.
fn cp_upper(successes: u64, trials: u64, level: f64) -> f64 {
    if successes == trials {
        return 1.0;
    }
    let a = successes as f64 + 1.0;
    let b = (trials - successes) as f64;
    Beta::new(a, b).expect("valid Beta shape").inverse_cdf(1.0 - level)
}

/// Simultaneous bounds for certification: a lower bound on the top-class
/// probability and an upper bound on the runner-up, each at level
/// `alpha / n_classes` (Bonferroni across the per-class tests). The
/// runner-up bound is additionally capped at `1 - p_a_lower`.
pub fn clopper_pearson_bounds(
    tally: &VoteTally,
    alpha: f64,
    n_classes: usize,
) -> Result<ProbabilityBounds> {
    if tally.n_valid == 0 {
        return Err(Error::Numeric("no valid votes: abstain".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha {alpha} outside (0, 1)")));
    }
    if n_classes == 0 {
        return Err(Error::Config("n_classes must be positive".into()));
    }
    let level = alpha / n_classes as f64;
    let (_, n_a, _, n_b) = tally.top_two();
    let p_a_lower = cp_lower(n_a, tally.n_valid, level);
    let p_b_upper = cp_upper(n_b, tally.n_valid, level).min(1.0 - p_a_lower);
    Ok(ProbabilityBounds { p_a_lower, p_b_upper, alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteDecision {
    Proceed,
    Abstain,
}

/// Two-sided exact binomial p-value for `n_a` successes out of
/// `n_a + n_b` trials at p = 1/2.
pub fn binomial_two_sided_p(n_a: u64, n_b: u64) -> f64 {
    let n = n_a + n_b;
    if n == 0 {
        return 1.0;
    }
    let hi = n_a.max(n_b);
    let dist = Binomial::new(0.5, n).expect("valid Binomial");
    // sf(k) = P(X > k), so the upper tail P(X >= hi) is sf(hi - 1).
    let tail = if hi == 0 { 1.0 } else { dist.sf(hi - 1) };
    (2.0 * tail).min(1.0)
}

/// The abstention test: proceed only when the top class beats the runner-up
/// by more than chance at level `alpha`.
pub fn abstain_test(tally: &VoteTally, alpha: f64) -> VoteDecision {
    if tally.n_valid == 0 {
        return VoteDecision::Abstain;
    }
    let (_, n_a, _, n_b) = tally.top_two();
    if binomial_two_sided_p(n_a, n_b) > alpha {
        VoteDecision::Abstain
    } else {
        VoteDecision::Proceed
    }
}

/// Dump tallies as CSV, one row per node/class pair.
pub fn write_tallies_csv(out: &mut impl Write, tallies: &[VoteTally]) -> Result<()> {
    writeln!(out, "node,class,count,n_valid,n_total")?;
    for (node, tally) in tallies.iter().enumerate() {
        for (class, &count) in tally.counts.iter().enumerate() {
            writeln!(
                out,
                "{node},{class},{count},{},{}",
                tally.n_valid, tally.n_total
            )?;
        }
    }
    Ok(())
}
