//! Certification mathematics.
//!
//! For edge-flip smoothing, the adversary's budget (r_a additions, r_d
//! deletions) partitions the noise space into r_a + r_d + 1 constant
//! likelihood-ratio regions. The worst-case smoothed margin over that budget
//! is a pair of fractional knapsacks over the regions; the prediction is
//! certified when the margin stays positive. Gaussian feature noise and
//! hash-partition voting get their own closed-form certificates.
//!
//! Every certificate here is cross-checked in tests by brute-force oracles:
//! exhaustive noise enumeration, an exact rational-arithmetic knapsack, and
//! vote-flip simulation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::smoothing::SparseNoiseConfig;
use crate::voting::{abstain_test, clopper_pearson_bounds, ProbabilityBounds, VoteDecision, VoteTally};

/// Constant likelihood-ratio regions for one (r_a, r_d) budget.
///
/// Region i collects noise outcomes where exactly i of the budgeted edge
/// slots are flipped by the noise. `r[i]` is the region's mass under the
/// clean graph, `r_prime[i]` under the perturbed graph, and
/// `ratios[i] = r[i] / r_prime[i]` is constant across the region. Regions
/// with zero mass on both sides are merged away, so `ratios` may be shorter
/// than r_a + r_d + 1 when a flip probability is degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionTable {
    pub budget: (u32, u32),
    pub ratios: Vec<f64>,
    pub log_ratios: Vec<f64>,
    pub r: Vec<f64>,
    pub r_prime: Vec<f64>,
}

/// Poisson-Binomial pmf by iterative convolution: probability of k successes
/// among independent Bernoulli trials with the given success probabilities.
pub fn poisson_binomial(probs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for &p in probs {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &m) in pmf.iter().enumerate() {
            next[k] += m * (1.0 - p);
            next[k + 1] += m * p;
        }
        pmf = next;
    }
    pmf
}

fn kahan_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0, 0.0);
    for x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

impl RegionTable {
    /// Degenerate zero-budget table: one region holding all the mass.
    fn single_region() -> Self {
        Self {
            budget: (0, 0),
            ratios: vec![1.0],
            log_ratios: vec![0.0],
            r: vec![1.0],
            r_prime: vec![1.0],
        }
    }
}

/// Build the region table for a budget under edge-flip noise.
///
/// The clean-graph region masses follow a Poisson-Binomial with p_plus for
/// each budgeted addition and p_minus for each deletion; the perturbed-graph
/// masses use the complements. Ratios are computed in log space.
pub fn region_table(cfg: &SparseNoiseConfig, r_a: u32, r_d: u32) -> Result<RegionTable> {
    cfg.validate()?;
    if r_a + r_d == 0 {
        return Ok(RegionTable::single_region());
    }
    let (pp, pm) = (cfg.p_plus, cfg.p_minus);
    let mut probs = Vec::with_capacity((r_a + r_d) as usize);
    probs.extend(std::iter::repeat(pp).take(r_a as usize));
    probs.extend(std::iter::repeat(pm).take(r_d as usize));
    let r = poisson_binomial(&probs);
    let mut probs_prime = Vec::with_capacity(probs.len());
    probs_prime.extend(std::iter::repeat(1.0 - pm).take(r_a as usize));
    probs_prime.extend(std::iter::repeat(1.0 - pp).take(r_d as usize));
    let r_prime = poisson_binomial(&probs_prime);

    // log c_i = (i - r_d) ln(p+/(1-p-)) + (i - r_a) ln(p-/(1-p+)), with the
    // convention that a zero coefficient kills an infinite log term.
    let l1 = pp.ln() - (1.0 - pm).ln();
    let l2 = pm.ln() - (1.0 - pp).ln();
    let term = |coef: f64, l: f64| if coef == 0.0 { 0.0 } else { coef * l };

    let mut merged: Vec<(f64, f64, f64)> = Vec::new(); // (log_ratio, r, r')
    for i in 0..=(r_a + r_d) as usize {
        let (ri, rpi) = (r[i], r_prime[i]);
        if ri == 0.0 && rpi == 0.0 {
            continue; // unreachable region under degenerate probabilities
        }
        // The analytic formula breaks down on zero-mass regions; classify
        // those by their masses instead.
        let log_c = if rpi == 0.0 {
            f64::INFINITY
        } else if ri == 0.0 {
            f64::NEG_INFINITY
        } else {
            let c = term(i as f64 - r_d as f64, l1) + term(i as f64 - r_a as f64, l2);
            if c.is_nan() {
                return Err(Error::Numeric(format!(
                    "undefined likelihood ratio for p+={pp}, p-={pm}"
                )));
            }
            c
        };
        // tolerance absorbs float residue when p+ + p- = 1 (all ratios 1)
        match merged
            .iter_mut()
            .find(|(lc, _, _)| *lc == log_c || (*lc - log_c).abs() < 1e-9)
        {
            Some(slot) => {
                slot.1 += ri;
                slot.2 += rpi;
            }
            None => merged.push((log_c, ri, rpi)),
        }
    }
    Ok(RegionTable {
        budget: (r_a, r_d),
        ratios: merged.iter().map(|m| m.0.exp()).collect(),
        log_ratios: merged.iter().map(|m| m.0).collect(),
        r: merged.iter().map(|m| m.1).collect(),
        r_prime: merged.iter().map(|m| m.2).collect(),
    })
}

/// Worst-case smoothed margin over a budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginResult {
    pub mu: f64,
    pub certified: bool,
}

/// Worst-case margin via two greedy fractional knapsacks.
///
/// The adversary pushes the top class's clean mass p_a_lower into regions
/// with the largest ratio first (where perturbed mass is cheapest) and the
/// runner-up's mass p_b_upper into the smallest-ratio regions. Certified
/// when the resulting perturbed-graph margin mu stays positive.
pub fn worst_case_margin(table: &RegionTable, bounds: &ProbabilityBounds) -> MarginResult {
    let p_a = bounds.p_a_lower;
    let mut p_b = bounds.p_b_upper;
    if p_a + p_b > 1.0 {
        log::warn!(
            "p_a_lower {} + p_b_upper {} exceeds 1; clamping the upper bound",
            p_a,
            p_b
        );
        p_b = 1.0 - p_a;
    }

    let mut order: Vec<usize> = (0..table.ratios.len()).collect();
    order.sort_by(|&a, &b| {
        table.log_ratios[b]
            .partial_cmp(&table.log_ratios[a])
            .expect("ratios are never NaN")
    });

    // s: minimize perturbed mass subject to clean mass = p_a (descending
    // ratio). Regions with zero clean mass only hurt, so skip them.
    let mut budget = p_a;
    let mut s_terms = Vec::new();
    for &i in &order {
        if budget <= 0.0 {
            break;
        }
        if table.r[i] == 0.0 {
            continue;
        }
        let take = (budget / table.r[i]).min(1.0);
        s_terms.push(take * table.r_prime[i]);
        budget -= take * table.r[i];
    }
    let s_dot = kahan_sum(s_terms);

    // t: maximize perturbed mass subject to clean mass = p_b (ascending
    // ratio). Zero-clean-mass regions are free and always taken.
    let mut budget = p_b;
    let mut t_terms = Vec::new();
    for &i in order.iter().rev() {
        if table.r[i] == 0.0 {
            t_terms.push(table.r_prime[i]);
            continue;
        }
        if budget <= 0.0 {
            break;
        }
        let take = (budget / table.r[i]).min(1.0);
        t_terms.push(take * table.r_prime[i]);
        budget -= take * table.r[i];
    }
    let t_dot = kahan_sum(t_terms);

    let mu = (s_dot - t_dot).clamp(-1.0, 1.0);
    MarginResult { mu, certified: mu > 0.0 }
}

/// Outcome of certifying one node at one budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertStatus {
    Certified,
    NotCertified,
    Abstain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeCertificate {
    Certified { y_a: u32 },
    NotCertified { y_a: u32 },
    Abstain,
}

/// Certify one node's tally at one budget: abstention test, then
/// Clopper-Pearson bounds, then the worst-case margin.
pub fn certify_node(
    tally: &VoteTally,
    cfg: &SparseNoiseConfig,
    alpha: f64,
    n_classes: usize,
    budget: (u32, u32),
) -> Result<NodeCertificate> {
    if abstain_test(tally, alpha) == VoteDecision::Abstain {
        return Ok(NodeCertificate::Abstain);
    }
    let (y_a, _, _, _) = tally.top_two();
    let bounds = clopper_pearson_bounds(tally, alpha, n_classes)?;
    let table = region_table(cfg, budget.0, budget.1)?;
    if worst_case_margin(&table, &bounds).certified {
        Ok(NodeCertificate::Certified { y_a })
    } else {
        Ok(NodeCertificate::NotCertified { y_a })
    }
}

/// Per-node certificates over the full budget grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateGrid {
    pub max_ra: u32,
    pub max_rd: u32,
    /// per node, row-major over (r_a, r_d)
    pub statuses: Vec<Vec<CertStatus>>,
    /// clean smoothed prediction (tally argmax); None only when the node
    /// collected no valid votes at all
    pub predictions: Vec<Option<u32>>,
    /// prediction matches the true label (abstain counts as incorrect)
    pub correct: Vec<bool>,
}

impl CertificateGrid {
    fn idx(&self, r_a: u32, r_d: u32) -> usize {
        (r_a * (self.max_rd + 1) + r_d) as usize
    }

    pub fn status(&self, node: usize, r_a: u32, r_d: u32) -> CertStatus {
        self.statuses[node][self.idx(r_a, r_d)]
    }

    pub fn n_nodes(&self) -> usize {
        self.statuses.len()
    }

    pub fn clean_accuracy(&self) -> f64 {
        let hits = self.correct.iter().filter(|&&c| c).count();
        hits as f64 / self.correct.len().max(1) as f64
    }

    /// Fraction of nodes that abstain (statuses are uniform across budgets
    /// for abstaining nodes, so the zero-budget cell is representative).
    pub fn abstain_rate(&self) -> f64 {
        let abst = self
            .statuses
            .iter()
            .filter(|row| row[0] == CertStatus::Abstain)
            .count();
        abst as f64 / self.statuses.len().max(1) as f64
    }

    /// Fraction of nodes both correct and certified at the budget.
    pub fn certified_accuracy(&self, r_a: u32, r_d: u32) -> f64 {
        let i = self.idx(r_a, r_d);
        let hits = self
            .statuses
            .iter()
            .zip(&self.correct)
            .filter(|(s, &c)| c && s[i] == CertStatus::Certified)
            .count();
        hits as f64 / self.statuses.len().max(1) as f64
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let mut budgets = Vec::new();
        for ra in 0..=self.max_ra {
            for rd in 0..=self.max_rd {
                budgets.push(serde_json::json!({
                    "ra": ra,
                    "rd": rd,
                    "certified_accuracy": self.certified_accuracy(ra, rd),
                }));
            }
        }
        serde_json::json!({
            "clean_accuracy": self.clean_accuracy(),
            "abstain_rate": self.abstain_rate(),
            "budgets": budgets,
        })
    }
}

/// Certify every node over every budget up to (max_ra, max_rd).
///
/// Bounds are computed once per node and region tables once per budget; the
/// scan over budgets stops early in each row because the certified set
/// shrinks as either budget grows (downward closure).
pub fn certify_grid(
    tallies: &[VoteTally],
    labels: &[u32],
    cfg: &SparseNoiseConfig,
    alpha: f64,
    n_classes: usize,
    max_ra: u32,
    max_rd: u32,
) -> Result<CertificateGrid> {
    if tallies.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} tallies but {} labels",
            tallies.len(),
            labels.len()
        )));
    }
    let mut tables = Vec::with_capacity(((max_ra + 1) * (max_rd + 1)) as usize);
    for ra in 0..=max_ra {
        for rd in 0..=max_rd {
            tables.push(region_table(cfg, ra, rd)?);
        }
    }
    let width = (max_rd + 1) as usize;

    let per_node: Vec<(Vec<CertStatus>, Option<u32>)> = tallies
        .par_iter()
        .map(|tally| {
            let y_a = if tally.n_valid > 0 { Some(tally.top_two().0) } else { None };
            if abstain_test(tally, alpha) == VoteDecision::Abstain {
                return (vec![CertStatus::Abstain; tables.len()], y_a);
            }
            let y_a = y_a.expect("non-abstaining tally has votes");
            let bounds = clopper_pearson_bounds(tally, alpha, n_classes)
                .expect("non-abstaining tally has valid votes");
            let mut row = vec![CertStatus::NotCertified; tables.len()];
            // mu is non-increasing in both budgets, so the first failure in a
            // row caps the certifiable deletion budget for all larger ra.
            let mut rd_limit = max_rd + 1;
            for ra in 0..=max_ra {
                for rd in 0..rd_limit {
                    let table = &tables[(ra as usize) * width + rd as usize];
                    if worst_case_margin(table, &bounds).certified {
                        row[(ra as usize) * width + rd as usize] = CertStatus::Certified;
                    } else {
                        rd_limit = rd;
                        break;
                    }
                }
                if rd_limit == 0 {
                    break;
                }
            }
            (row, Some(y_a))
        })
        .collect();

    let statuses: Vec<Vec<CertStatus>> = per_node.iter().map(|(s, _)| s.clone()).collect();
    let predictions: Vec<Option<u32>> = per_node.iter().map(|(_, p)| *p).collect();
    let correct = predictions
        .iter()
        .zip(labels)
        .map(|(p, &y)| *p == Some(y))
        .collect();
    Ok(CertificateGrid { max_ra, max_rd, statuses, predictions, correct })
}

/// Dump a certificate grid as CSV, one row per (node, budget).
pub fn write_grid_csv(out: &mut impl std::io::Write, grid: &CertificateGrid) -> Result<()> {
    writeln!(out, "node,ra,rd,status")?;
    for node in 0..grid.n_nodes() {
        for ra in 0..=grid.max_ra {
            for rd in 0..=grid.max_rd {
                let status = match grid.status(node, ra, rd) {
                    CertStatus::Certified => "certified",
                    CertStatus::NotCertified => "not_certified",
                    CertStatus::Abstain => "abstain",
                };
                writeln!(out, "{node},{ra},{rd},{status}")?;
            }
        }
    }
    Ok(())
}

/// Certified L2 radius for Gaussian feature smoothing:
/// R = (sigma/2)(Phi^-1(p_a_lower) - Phi^-1(p_b_upper)), floored at 0.
pub fn gaussian_radius(bounds: &ProbabilityBounds, sigma: f64) -> f64 {
    if bounds.p_a_lower <= bounds.p_b_upper || bounds.p_a_lower <= 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let qa = normal.inverse_cdf(bounds.p_a_lower.min(1.0 - f64::EPSILON));
    let qb = if bounds.p_b_upper <= 0.0 {
        f64::NEG_INFINITY
    } else {
        normal.inverse_cdf(bounds.p_b_upper)
    };
    (0.5 * sigma * (qa - qb)).max(0.0)
}

/// Certified edge budget for hash-partition voting.
///
/// Each perturbed edge lands in exactly one subgraph, so m edge
/// modifications flip at most m of the T_s votes. The prediction survives
/// all reassignments of up to m votes when the winner's lead is at least
/// 2m (+1 against larger-indexed classes, which lose ties).
pub fn gnncert_certify(tally: &VoteTally) -> (u32, u64) {
    let (y_a, n_a, _, _) = tally.top_two();
    if tally.counts.len() < 2 {
        return (y_a, tally.n_total);
    }
    let mut m = u64::MAX;
    for (y, &c) in tally.counts.iter().enumerate() {
        if y as u32 == y_a {
            continue;
        }
        let tie_penalty = if (y as u32) < y_a { 1 } else { 0 };
        let lead = n_a.saturating_sub(c + tie_penalty);
        m = m.min(lead / 2);
    }
    (y_a, m)
}

/// Exact rational-arithmetic margin, solving the two fractional knapsacks
/// independently of the floating-point greedy. Test oracle only.
pub fn exact_margin_oracle(table: &RegionTable, bounds: &ProbabilityBounds) -> Result<f64> {
    use num_rational::BigRational;
    use num_traits::{FromPrimitive, ToPrimitive, Zero};

    let rat = |x: f64| -> Result<BigRational> {
        BigRational::from_f64(x).ok_or_else(|| Error::Numeric(format!("non-finite value {x}")))
    };
    let one = BigRational::from_integer(1.into());
    let p_a = rat(bounds.p_a_lower)?;
    let mut p_b = rat(bounds.p_b_upper)?;
    if &p_a + &p_b > one {
        p_b = &one - &p_a;
    }
    if p_a > one || p_b < BigRational::zero() {
        return Err(Error::Numeric("infeasible probability bounds".into()));
    }

    let n = table.r.len();
    let r: Vec<BigRational> = table.r.iter().map(|&x| rat(x)).collect::<Result<_>>()?;
    let rp: Vec<BigRational> = table.r_prime.iter().map(|&x| rat(x)).collect::<Result<_>>()?;

    // Sort by ratio r_i / r'_i descending via cross-multiplication, which
    // stays exact and handles zero denominators (infinite ratios first).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| (&r[b] * &rp[a]).cmp(&(&r[a] * &rp[b])));

    let mut budget = p_a.clone();
    let mut s_dot = BigRational::zero();
    for &i in &order {
        if budget.is_zero() || r[i].is_zero() {
            continue;
        }
        let take = if budget >= r[i] { one.clone() } else { &budget / &r[i] };
        s_dot += &take * &rp[i];
        budget -= &take * &r[i];
    }
    if !budget.is_zero() {
        return Err(Error::Numeric("clean mass cannot absorb p_a_lower".into()));
    }

    let mut budget = p_b.clone();
    let mut t_dot = BigRational::zero();
    for &i in order.iter().rev() {
        if r[i].is_zero() {
            t_dot += &rp[i];
            continue;
        }
        if budget.is_zero() {
            continue;
        }
        let take = if budget >= r[i] { one.clone() } else { &budget / &r[i] };
        t_dot += &take * &rp[i];
        budget -= &take * &r[i];
    }

    (s_dot - t_dot)
        .to_f64()
        .ok_or_else(|| Error::Numeric("margin not representable".into()))
}
