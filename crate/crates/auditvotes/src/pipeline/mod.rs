//! End-to-end orchestration: configuration, the smoothing loop, the
//! de-randomized and Gaussian pipelines, empirical attack evaluation, and
//! reporting.
//!
//! All runs are deterministic given the config's global seed: one root seed
//! fans out to independent streams (split, init, noise, attack) so toggling
//! the augmenter never perturbs the noise draws — paired comparisons between
//! augmented and baseline runs share identical noisy samples.

pub mod config;

use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

pub use config::ExperimentConfig;

use crate::augment::{
    fae_scores, gnncert_threshold, jaccard_scores, noise_adaptive_thresholds, sim_scores,
    train_augmenter, AugmenterDims, AugmenterParams, EdgeScoreMatrix, FaeParams, Rewirer,
    ScoreKind, SimParams,
};
use crate::certify::{
    certify_grid, gaussian_radius, gnncert_certify, write_grid_csv, CertStatus,
};
use crate::classify::{
    load_gcn_checkpoint, load_mlp_checkpoint, mlp_forward, save_gcn_checkpoint,
    save_mlp_checkpoint, train_classifier, train_mlp, GcnModel, GcnParams,
    TrainConfig,
};
use crate::error::{Error, Result};
use crate::graph::{
    generate_sbm, graph_stats, load_dataset, load_dataset_with_ids, make_inductive_split,
    AucInput, GraphStats, InductiveSplit, SparseGraph,
};
use crate::rng::{derive_seed, mix, substream};
use crate::smoothing::{
    hash_partition, sample_gaussian_noise, sample_sparse_noise, GaussianNoiseConfig,
    PartitionConfig, SparseNoiseConfig,
};
use crate::voting::{
    abstain_test, clopper_pearson_bounds, record_sample, write_tallies_csv, FilterConfig,
    FilterKind, VoteDecision, VoteTally,
};

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn ser_round6<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round6(*x))
}

fn ser_round6_opt<S: Serializer>(
    x: &Option<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&round6(*v)),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetAccuracy {
    pub ra: u32,
    pub rd: u32,
    #[serde(serialize_with = "ser_round6")]
    pub certified_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeBudgetAccuracy {
    pub m: u64,
    #[serde(serialize_with = "ser_round6")]
    pub certified_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusAccuracy {
    #[serde(serialize_with = "ser_round6")]
    pub radius: f64,
    #[serde(serialize_with = "ser_round6")]
    pub certified_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsOut {
    #[serde(serialize_with = "ser_round6")]
    pub edge_sparsity: f64,
    #[serde(serialize_with = "ser_round6")]
    pub homophily_mean: f64,
    #[serde(serialize_with = "ser_round6_opt")]
    pub reconstruction_auc: Option<f64>,
    pub edge_count: usize,
}

impl StatsOut {
    fn new(stats: &GraphStats, edge_count: usize) -> Self {
        Self {
            edge_sparsity: stats.edge_sparsity,
            homophily_mean: stats.homophily_mean,
            reconstruction_auc: stats.reconstruction_auc,
            edge_count,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalEval {
    pub attack_budget: u64,
    pub n_targets: usize,
    #[serde(serialize_with = "ser_round6")]
    pub accuracy_before: f64,
    #[serde(serialize_with = "ser_round6")]
    pub accuracy_after: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    #[serde(serialize_with = "ser_round6")]
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub scheme: String,
    #[serde(serialize_with = "ser_round6")]
    pub clean_accuracy: f64,
    #[serde(serialize_with = "ser_round6")]
    pub abstain_rate: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub budgets: Vec<BudgetAccuracy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edge_budgets: Vec<EdgeBudgetAccuracy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub radii: Vec<RadiusAccuracy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats_before: Option<StatsOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats_after: Option<StatsOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical: Option<EmpiricalEval>,
    pub timings: Vec<StageTime>,
    #[serde(serialize_with = "ser_round6")]
    pub total_seconds: f64,
}

impl Report {
    /// Certified accuracy can never exceed clean accuracy: certified nodes
    /// are a subset of correct ones.
    fn check_invariants(&self) -> Result<()> {
        let cap = self.clean_accuracy + 1e-12;
        let ok = self.budgets.iter().all(|b| b.certified_accuracy <= cap)
            && self.edge_budgets.iter().all(|b| b.certified_accuracy <= cap)
            && self.radii.iter().all(|b| b.certified_accuracy <= cap);
        if ok {
            Ok(())
        } else {
            Err(Error::Numeric(
                "certified accuracy exceeded clean accuracy".into(),
            ))
        }
    }

    pub fn certified_accuracy_at(&self, ra: u32, rd: u32) -> Option<f64> {
        self.budgets
            .iter()
            .find(|b| b.ra == ra && b.rd == rd)
            .map(|b| b.certified_accuracy)
    }
}

struct StageTimer {
    stages: Vec<StageTime>,
    start: Instant,
    last: Instant,
}

impl StageTimer {
    fn new() -> Self {
        let now = Instant::now();
        Self { stages: Vec::new(), start: now, last: now }
    }

    fn mark(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push(StageTime {
            stage: stage.to_string(),
            seconds: now.duration_since(self.last).as_secs_f64(),
        });
        self.last = now;
    }

    fn finish(self) -> (Vec<StageTime>, f64) {
        let total = self.start.elapsed().as_secs_f64();
        (self.stages, total)
    }
}

/// Environment overrides: AUDITVOTES_OUT_DIR replaces the output directory.
pub fn apply_env_overrides(cfg: &mut ExperimentConfig) {
    if let Ok(dir) = std::env::var("AUDITVOTES_OUT_DIR") {
        if !dir.is_empty() {
            cfg.output.dir = dir.into();
        }
    }
}

/// AUDITVOTES_THREADS caps the worker pool; None leaves rayon's default.
pub fn thread_override() -> Option<usize> {
    std::env::var("AUDITVOTES_THREADS").ok()?.parse().ok()
}

/// Load (or synthesize) the graph named by the config. Graphs without
/// external node ids get their index as the id so hash partitioning works.
pub fn load_graph(cfg: &ExperimentConfig) -> Result<SparseGraph> {
    let d = &cfg.dataset;
    let mut g = if let Some(sbm) = &d.sbm {
        generate_sbm(
            sbm.classes,
            sbm.nodes_per_class,
            sbm.p_in,
            sbm.p_out,
            sbm.feature_dim,
            sbm.feature_signal,
            derive_seed(cfg.seed, "sbm"),
        )?
    } else {
        let (edges, feats, labels) = match (&d.edges, &d.features, &d.labels) {
            (Some(e), Some(f), Some(l)) => (e, f, l),
            _ => return Err(Error::Config("dataset paths incomplete".into())),
        };
        match &d.node_ids {
            Some(ids) => load_dataset_with_ids(edges, feats, labels, ids)?,
            None => load_dataset(edges, feats, labels)?,
        }
    };
    if g.external_ids().is_none() {
        g.set_external_ids((0..g.n()).map(|i| i.to_string()).collect())?;
    }
    Ok(g)
}

fn train_config(cfg: &ExperimentConfig, noise: Option<SparseNoiseConfig>) -> TrainConfig {
    TrainConfig {
        learning_rate: cfg.train.learning_rate,
        weight_decay: cfg.train.weight_decay,
        max_epochs: cfg.train.max_epochs,
        patience: cfg.train.patience,
        noise,
        seed: derive_seed(cfg.seed, "init"),
    }
}

/// Load the classifier checkpoint when it exists, otherwise train (and save
/// when a checkpoint path is configured).
fn get_classifier(
    cfg: &ExperimentConfig,
    g: &SparseGraph,
    split: &InductiveSplit,
    train_noise: Option<SparseNoiseConfig>,
    transform: Option<crate::classify::GraphTransform<'_>>,
) -> Result<GcnParams> {
    if let Some(path) = &cfg.train.checkpoint {
        if path.exists() {
            let params = load_gcn_checkpoint(path)?;
            params.check(g.features().dim())?;
            if params.w2.ncols() != g.num_classes() {
                return Err(Error::Checkpoint(format!(
                    "checkpoint has {} classes, dataset has {}",
                    params.w2.ncols(),
                    g.num_classes()
                )));
            }
            return Ok(params);
        }
    }
    let tc = train_config(cfg, train_noise);
    let params = train_classifier(g, split, &tc, cfg.train.hidden, transform)?;
    if let Some(path) = &cfg.train.checkpoint {
        save_gcn_checkpoint(path, &params)?;
    }
    Ok(params)
}

#[derive(Serialize, Deserialize)]
struct AugCheckpoint {
    kind: ScoreKind,
    matrices: Vec<Vec<Vec<f64>>>,
}

fn matrix_to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    let flat: Vec<f64> = rows.iter().flat_map(|x| x.iter().copied()).collect();
    Array2::from_shape_vec((r, c), flat).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save_augmenter_json(path: impl AsRef<Path>, params: &AugmenterParams) -> Result<()> {
    let ckpt = match params {
        AugmenterParams::Jaccard => AugCheckpoint { kind: ScoreKind::Jaccard, matrices: vec![] },
        AugmenterParams::Fae(p) => AugCheckpoint {
            kind: ScoreKind::Fae,
            matrices: vec![matrix_to_rows(&p.w2), matrix_to_rows(&p.w1)],
        },
        AugmenterParams::Sim(p) => AugCheckpoint {
            kind: ScoreKind::Sim,
            matrices: vec![p.weights.clone()],
        },
    };
    let text = serde_json::to_string(&ckpt).map_err(|e| Error::Checkpoint(e.to_string()))?;
    fs::write(path.as_ref(), text)?;
    Ok(())
}

pub fn load_augmenter_json(path: impl AsRef<Path>) -> Result<AugmenterParams> {
    let text = fs::read_to_string(path.as_ref())?;
    let ckpt: AugCheckpoint =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    match ckpt.kind {
        ScoreKind::Jaccard => Ok(AugmenterParams::Jaccard),
        ScoreKind::Fae => {
            if ckpt.matrices.len() != 2 {
                return Err(Error::Checkpoint("embedding checkpoint needs two matrices".into()));
            }
            Ok(AugmenterParams::Fae(FaeParams {
                w2: rows_to_matrix(&ckpt.matrices[0])?,
                w1: rows_to_matrix(&ckpt.matrices[1])?,
            }))
        }
        ScoreKind::Sim => {
            if ckpt.matrices.len() != 1 {
                return Err(Error::Checkpoint("similarity checkpoint needs one matrix".into()));
            }
            Ok(AugmenterParams::Sim(SimParams { weights: ckpt.matrices[0].clone() }))
        }
    }
}

/// Load or train the configured augmenter on the training subgraph.
fn get_augmenter(
    cfg: &ExperimentConfig,
    g_train: &SparseGraph,
    kind: ScoreKind,
) -> Result<AugmenterParams> {
    if let Some(path) = &cfg.augmenter.checkpoint {
        if path.exists() {
            let params = load_augmenter_json(path)?;
            if params.kind() != kind {
                return Err(Error::Checkpoint("augmenter checkpoint kind mismatch".into()));
            }
            return Ok(params);
        }
    }
    let params = if kind == ScoreKind::Jaccard {
        AugmenterParams::Jaccard
    } else {
        let dims = AugmenterDims { h2: cfg.augmenter.h2, e: cfg.augmenter.e, m: cfg.augmenter.m };
        let tc = TrainConfig {
            learning_rate: cfg.augmenter.learning_rate.unwrap_or(cfg.train.learning_rate),
            weight_decay: 0.0,
            max_epochs: cfg.augmenter.epochs,
            patience: cfg.augmenter.epochs,
            noise: None,
            seed: derive_seed(cfg.seed, "aug"),
        };
        train_augmenter(g_train, kind, &tc, &dims)?.params
    };
    if let Some(path) = &cfg.augmenter.checkpoint {
        save_augmenter_json(path, &params)?;
    }
    Ok(params)
}

fn score_matrix(
    g: &SparseGraph,
    params: &AugmenterParams,
    candidate_k: usize,
) -> Result<EdgeScoreMatrix> {
    match params {
        AugmenterParams::Jaccard => jaccard_scores(g, candidate_k),
        AugmenterParams::Fae(p) => fae_scores(g, p, candidate_k),
        AugmenterParams::Sim(p) => sim_scores(g, p, candidate_k),
    }
}

/// Directed edge density of the training graph: nnz of the symmetric
/// adjacency over n^2. The basis for the expected-noise-volume thresholds.
fn edge_ratio(g_train: &SparseGraph) -> f64 {
    let n = g_train.n() as f64;
    2.0 * g_train.edge_count() as f64 / (n * n)
}

/// The parallel hot path: sample noisy graphs, rewire, classify, filter,
/// tally. Worker-private tallies merge associatively, so the result is
/// independent of scheduling.
fn smooth_tallies(
    g: &SparseGraph,
    model: &GcnModel,
    rewirer: Option<&Rewirer>,
    noise: &SparseNoiseConfig,
    n_samples: u64,
    filter: &FilterConfig,
) -> Result<Vec<VoteTally>> {
    let classes = g.num_classes();
    let fresh = || vec![VoteTally::new(classes); g.n()];
    (0..n_samples)
        .into_par_iter()
        .try_fold(fresh, |mut acc, i| -> Result<Vec<VoteTally>> {
            let noisy = sample_sparse_noise(g, noise, i)?;
            let input = match rewirer {
                Some(r) => r.rewire(&noisy),
                None => noisy,
            };
            let preds = model.forward_graph(&input);
            record_sample(&mut acc, &preds, &input, filter)?;
            Ok(acc)
        })
        .try_reduce(fresh, |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                x.merge(y);
            }
            Ok(a)
        })
}

fn write_outputs(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    report: &Report,
    tallies: Option<&[VoteTally]>,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("config.resolved.toml"), cfg.to_toml_string()?)?;
    let json =
        serde_json::to_string_pretty(report).map_err(|e| Error::Numeric(e.to_string()))?;
    fs::write(out_dir.join("report.json"), json)?;
    if let Some(tallies) = tallies {
        let mut buf = Vec::new();
        write_tallies_csv(&mut buf, tallies)?;
        fs::write(out_dir.join("tallies.csv"), buf)?;
    }
    Ok(())
}

fn smoothed_correct(tally: &VoteTally, label: u32) -> bool {
    tally.n_valid > 0 && tally.top_two().0 == label
}

/// Randomized-smoothing certification: sample, rewire, classify, filter,
/// tally, then certify the whole budget grid on the test nodes. Writes
/// report.json, grid.csv, tallies.csv, and the resolved config.
pub fn run_randomized_pipeline(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let sparse = cfg
        .smoothing
        .sparse
        .as_ref()
        .ok_or_else(|| Error::Config("randomized pipeline needs [smoothing.sparse]".into()))?;
    let noise = SparseNoiseConfig {
        p_plus: sparse.p_plus,
        p_minus: sparse.p_minus,
        seed: derive_seed(cfg.seed, "noise"),
    };
    noise.validate()?;
    let mut timer = StageTimer::new();

    let g = load_graph(cfg)?;
    let labels = g
        .labels()
        .ok_or_else(|| Error::Config("certification needs labels".into()))?
        .to_vec();
    let split = make_inductive_split(
        &g,
        cfg.split.per_class_labeled,
        cfg.split.test_fraction,
        derive_seed(cfg.seed, "split"),
    )?;
    timer.mark("load");

    // Augmenter first: classifier training sees the same rewiring it will
    // vote under.
    let train_nodes = split.train_nodes();
    let g_train = g.induced_subgraph(&train_nodes);
    let e_ratio = edge_ratio(&g_train);
    let mut rewirer = None;
    let mut train_rewirer = None;
    let mut full_scores: Option<Arc<EdgeScoreMatrix>> = None;
    if let Some(kind) = cfg.augmenter.kind {
        let params = get_augmenter(cfg, &g_train, kind)?;
        let scores = Arc::new(score_matrix(&g, &params, cfg.augmenter.candidate_k)?);
        let th = noise_adaptive_thresholds(&scores, &g, e_ratio, &noise)?;
        rewirer = Some(Rewirer::new(Arc::clone(&scores), th));
        full_scores = Some(scores);

        let train_scores =
            Arc::new(score_matrix(&g_train, &params, cfg.augmenter.candidate_k)?);
        let train_th = noise_adaptive_thresholds(&train_scores, &g_train, e_ratio, &noise)?;
        train_rewirer = Some(Rewirer::new(train_scores, train_th));
    }
    timer.mark("augment");

    let train_noise = cfg.train.with_noise.then(|| SparseNoiseConfig {
        p_plus: sparse.p_plus,
        p_minus: sparse.p_minus,
        seed: derive_seed(cfg.seed, "train-noise"),
    });
    let transform_fn = train_rewirer
        .as_ref()
        .map(|r| move |noisy: &SparseGraph| r.rewire(noisy));
    let params = get_classifier(
        cfg,
        &g,
        &split,
        train_noise,
        transform_fn
            .as_ref()
            .map(|f| f as crate::classify::GraphTransform<'_>),
    )?;
    let model = GcnModel::new(g.features(), params);
    timer.mark("train");

    // Graph statistics on one shared noisy sample, before and after rewiring.
    let sample0 = sample_sparse_noise(&g, &noise, 0)?;
    let stats_before = StatsOut::new(&graph_stats(&sample0, &labels, None)?, sample0.edge_count());
    let stats_after = match (&rewirer, &full_scores) {
        (Some(r), Some(scores)) => {
            let rewired = r.rewire(&sample0);
            let auc = AucInput { reference: &g, scores: scores.as_ref() };
            Some(StatsOut::new(
                &graph_stats(&rewired, &labels, Some(auc))?,
                rewired.edge_count(),
            ))
        }
        _ => None,
    };
    timer.mark("stats");

    let tallies = smooth_tallies(
        &g,
        &model,
        rewirer.as_ref(),
        &noise,
        cfg.certify.n_samples,
        &cfg.filter,
    )?;
    timer.mark("sample");

    let test_nodes = &split.test;
    let test_tallies: Vec<VoteTally> =
        test_nodes.iter().map(|&u| tallies[u as usize].clone()).collect();
    let test_labels: Vec<u32> = test_nodes.iter().map(|&u| labels[u as usize]).collect();
    let grid = certify_grid(
        &test_tallies,
        &test_labels,
        &noise,
        cfg.certify.alpha,
        g.num_classes(),
        cfg.certify.max_ra,
        cfg.certify.max_rd,
    )?;
    let mut budgets = Vec::new();
    for ra in 0..=cfg.certify.max_ra {
        for rd in 0..=cfg.certify.max_rd {
            budgets.push(BudgetAccuracy {
                ra,
                rd,
                certified_accuracy: grid.certified_accuracy(ra, rd),
            });
        }
    }
    timer.mark("certify");

    let (timings, total_seconds) = timer.finish();
    let report = Report {
        scheme: "sparse".into(),
        clean_accuracy: grid.clean_accuracy(),
        abstain_rate: grid.abstain_rate(),
        budgets,
        edge_budgets: vec![],
        radii: vec![],
        stats_before: Some(stats_before),
        stats_after,
        empirical: None,
        timings,
        total_seconds,
    };
    report.check_invariants()?;

    let out = &cfg.output.dir;
    write_outputs(out, cfg, &report, Some(&test_tallies))?;
    let mut buf = Vec::new();
    write_grid_csv(&mut buf, &grid)?;
    fs::write(out.join("grid.csv"), buf)?;
    Ok(report)
}

/// De-randomized certification: hash-partition the edges into T_s
/// subgraphs, vote once per subgraph, and certify an exact edge budget m
/// per node.
pub fn run_gnncert_pipeline(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let part = cfg
        .smoothing
        .partition
        .as_ref()
        .ok_or_else(|| Error::Config("this pipeline needs [smoothing.partition]".into()))?;
    let pcfg = PartitionConfig::new(part.t_s);
    pcfg.validate()?;
    let mut timer = StageTimer::new();

    let g = load_graph(cfg)?;
    let labels = g
        .labels()
        .ok_or_else(|| Error::Config("certification needs labels".into()))?
        .to_vec();
    let split = make_inductive_split(
        &g,
        cfg.split.per_class_labeled,
        cfg.split.test_fraction,
        derive_seed(cfg.seed, "split"),
    )?;
    timer.mark("load");

    let train_nodes = split.train_nodes();
    let g_train = g.induced_subgraph(&train_nodes);
    let e_ratio = edge_ratio(&g_train);
    let mut rewirer = None;
    if let Some(kind) = cfg.augmenter.kind {
        let params = get_augmenter(cfg, &g_train, kind)?;
        let scores = Arc::new(score_matrix(&g, &params, cfg.augmenter.candidate_k)?);
        let th = gnncert_threshold(&scores, g.n(), e_ratio, part.t_s)?;
        rewirer = Some(Rewirer::new(scores, th));
    }
    timer.mark("augment");

    let params = get_classifier(cfg, &g, &split, None, None)?;
    let model = GcnModel::new(g.features(), params);
    timer.mark("train");

    let subgraphs = hash_partition(&g, &pcfg)?;
    let stats_before =
        StatsOut::new(&graph_stats(&subgraphs[0], &labels, None)?, subgraphs[0].edge_count());
    let stats_after = rewirer.as_ref().map(|r| -> Result<StatsOut> {
        let rw = r.rewire(&subgraphs[0]);
        Ok(StatsOut::new(&graph_stats(&rw, &labels, None)?, rw.edge_count()))
    });
    let stats_after = stats_after.transpose()?;

    let filter = FilterConfig::none();
    let classes = g.num_classes();
    let per_sub: Vec<Vec<VoteTally>> = subgraphs
        .par_iter()
        .map(|sub| -> Result<Vec<VoteTally>> {
            let input = match &rewirer {
                Some(r) => r.rewire(sub),
                None => sub.clone(),
            };
            let preds = model.forward_graph(&input);
            let mut acc = vec![VoteTally::new(classes); g.n()];
            record_sample(&mut acc, &preds, &input, &filter)?;
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut tallies = vec![VoteTally::new(classes); g.n()];
    for sub in &per_sub {
        for (a, b) in tallies.iter_mut().zip(sub) {
            a.merge(b);
        }
    }
    timer.mark("sample");

    let test_nodes = &split.test;
    let max_m = cfg.certify.max_ra.max(cfg.certify.max_rd) as u64;
    let mut correct = Vec::with_capacity(test_nodes.len());
    let mut ms = Vec::with_capacity(test_nodes.len());
    for &u in test_nodes {
        let (y_a, m) = gnncert_certify(&tallies[u as usize]);
        correct.push(y_a == labels[u as usize]);
        ms.push(m);
    }
    let clean_accuracy =
        correct.iter().filter(|&&c| c).count() as f64 / correct.len().max(1) as f64;
    let edge_budgets: Vec<EdgeBudgetAccuracy> = (0..=max_m)
        .map(|m| {
            let hits = correct
                .iter()
                .zip(&ms)
                .filter(|(&c, &mv)| c && mv >= m)
                .count();
            EdgeBudgetAccuracy {
                m,
                certified_accuracy: hits as f64 / correct.len().max(1) as f64,
            }
        })
        .collect();
    timer.mark("certify");

    let (timings, total_seconds) = timer.finish();
    let report = Report {
        scheme: "partition".into(),
        clean_accuracy,
        abstain_rate: 0.0,
        budgets: vec![],
        edge_budgets,
        radii: vec![],
        stats_before: Some(stats_before),
        stats_after,
        empirical: None,
        timings,
        total_seconds,
    };
    report.check_invariants()?;

    let out = &cfg.output.dir;
    let test_tallies: Vec<VoteTally> =
        test_nodes.iter().map(|&u| tallies[u as usize].clone()).collect();
    write_outputs(out, cfg, &report, Some(&test_tallies))?;
    let mut buf = Vec::new();
    writeln!(buf, "node,y_a,m,correct")?;
    for (i, &u) in test_nodes.iter().enumerate() {
        let (y_a, _) = gnncert_certify(&tallies[u as usize]);
        writeln!(buf, "{i},{y_a},{},{}", ms[i], correct[i] as u8)?;
        let _ = u;
    }
    fs::write(out.join("gnncert.csv"), buf)?;
    Ok(report)
}

/// Deterministic Gaussian blobs: class c's center sits at `distance` along
/// axis c, points scatter with isotropic `spread`.
pub fn generate_blobs(
    b: &config::BlobsSection,
    seed: u64,
) -> Result<(Array2<f64>, Vec<u32>)> {
    if b.dim < b.classes || b.classes == 0 || b.per_class == 0 {
        return Err(Error::Config("blobs need dim >= classes >= 1 and points".into()));
    }
    let normal = Normal::new(0.0, b.spread).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = b.classes * b.per_class;
    let mut xs = Array2::zeros((n, b.dim));
    let mut ys = Vec::with_capacity(n);
    for c in 0..b.classes {
        for k in 0..b.per_class {
            let i = c * b.per_class + k;
            xs[[i, c]] = b.distance;
            for j in 0..b.dim {
                xs[[i, j]] += normal.sample(&mut rng);
            }
            ys.push(c as u32);
        }
    }
    Ok((xs, ys))
}

/// Gaussian feature-noise certification on a dense-vector dataset: N noisy
/// copies per input, confidence-filtered voting, Clopper-Pearson bounds,
/// certified L2 radius.
pub fn run_gaussian_pipeline(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let gauss = cfg
        .smoothing
        .gaussian
        .as_ref()
        .ok_or_else(|| Error::Config("this pipeline needs [smoothing.gaussian]".into()))?;
    let blobs = cfg
        .dataset
        .blobs
        .as_ref()
        .ok_or_else(|| Error::Config("gaussian smoothing needs [dataset.blobs]".into()))?;
    if matches!(cfg.filter.kind, FilterKind::Homophily | FilterKind::Jsd) {
        return Err(Error::Config(
            "graph filters do not apply to dense-vector smoothing".into(),
        ));
    }
    let mut timer = StageTimer::new();

    let (xs, ys) = generate_blobs(blobs, derive_seed(cfg.seed, "blobs"))?;
    let train_per_class =
        ((blobs.per_class as f64 * blobs.train_fraction).round() as usize).clamp(1, blobs.per_class);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for c in 0..blobs.classes {
        for k in 0..blobs.per_class {
            let i = c * blobs.per_class + k;
            if k < train_per_class {
                train_idx.push(i);
            } else {
                test_idx.push(i);
            }
        }
    }
    if test_idx.is_empty() {
        return Err(Error::Config("train_fraction leaves no test points".into()));
    }
    timer.mark("load");

    let xs_train = xs.select(ndarray::Axis(0), &train_idx);
    let ys_train: Vec<u32> = train_idx.iter().map(|&i| ys[i]).collect();
    let mlp = match &cfg.train.checkpoint {
        Some(path) if path.exists() => load_mlp_checkpoint(path)?,
        maybe_path => {
            let tc = train_config(cfg, None);
            let params =
                train_mlp(&xs_train, &ys_train, None, &tc, cfg.train.hidden, blobs.classes)?;
            if let Some(path) = maybe_path {
                save_mlp_checkpoint(path, &params)?;
            }
            params
        }
    };
    timer.mark("train");

    let noise_root = derive_seed(cfg.seed, "noise");
    let results: Vec<(VoteTally, f64)> = test_idx
        .par_iter()
        .enumerate()
        .map(|(pos, &i)| -> Result<(VoteTally, f64)> {
            let x: Vec<f64> = xs.row(i).to_vec();
            let ncfg = GaussianNoiseConfig {
                sigma: gauss.sigma,
                seed: mix(noise_root, pos as u64),
            };
            let mut tally = VoteTally::new(blobs.classes);
            for j in 0..cfg.certify.n_samples {
                let noisy = sample_gaussian_noise(&x, &ncfg, j)?;
                let pred = mlp_forward(&noisy, &mlp)?;
                tally.record(pred.class_index, cfg.filter.passes(pred.confidence));
            }
            let radius = match abstain_test(&tally, cfg.certify.alpha) {
                VoteDecision::Abstain => 0.0,
                VoteDecision::Proceed => {
                    let bounds =
                        clopper_pearson_bounds(&tally, cfg.certify.alpha, blobs.classes)?;
                    gaussian_radius(&bounds, gauss.sigma)
                }
            };
            Ok((tally, radius))
        })
        .collect::<Result<_>>()?;
    timer.mark("sample");

    let n_test = test_idx.len();
    let correct: Vec<bool> = results
        .iter()
        .zip(&test_idx)
        .map(|((t, _), &i)| smoothed_correct(t, ys[i]))
        .collect();
    let proceed: Vec<bool> = results
        .iter()
        .map(|(t, _)| abstain_test(t, cfg.certify.alpha) == VoteDecision::Proceed)
        .collect();
    let clean_accuracy =
        correct.iter().filter(|&&c| c).count() as f64 / n_test as f64;
    let abstain_rate = proceed.iter().filter(|&&p| !p).count() as f64 / n_test as f64;
    let radii: Vec<RadiusAccuracy> = cfg
        .certify
        .radius_grid
        .iter()
        .map(|&r| {
            let hits = (0..n_test)
                .filter(|&k| correct[k] && proceed[k] && results[k].1 >= r)
                .count();
            RadiusAccuracy { radius: r, certified_accuracy: hits as f64 / n_test as f64 }
        })
        .collect();
    timer.mark("certify");

    let (timings, total_seconds) = timer.finish();
    let report = Report {
        scheme: "gaussian".into(),
        clean_accuracy,
        abstain_rate,
        budgets: vec![],
        edge_budgets: vec![],
        radii,
        stats_before: None,
        stats_after: None,
        empirical: None,
        timings,
        total_seconds,
    };
    report.check_invariants()?;

    let out = &cfg.output.dir;
    let tallies: Vec<VoteTally> = results.iter().map(|(t, _)| t.clone()).collect();
    write_outputs(out, cfg, &report, Some(&tallies))?;
    let mut buf = Vec::new();
    writeln!(buf, "node,correct,radius")?;
    for k in 0..n_test {
        writeln!(buf, "{k},{},{:.6}", correct[k] as u8, results[k].1)?;
    }
    fs::write(out.join("radii.csv"), buf)?;
    Ok(report)
}

/// Empirical attack evaluation: a random-flip attacker toggles up to
/// `attack_budget` edges incident to each target, and we compare smoothed
/// accuracy on the targets before and after.
pub fn run_empirical_eval(
    cfg: &ExperimentConfig,
    attack_budget: u64,
    targets: &[u32],
) -> Result<Report> {
    cfg.validate()?;
    let sparse = cfg
        .smoothing
        .sparse
        .as_ref()
        .ok_or_else(|| Error::Config("attack evaluation needs [smoothing.sparse]".into()))?;
    let noise = SparseNoiseConfig {
        p_plus: sparse.p_plus,
        p_minus: sparse.p_minus,
        seed: derive_seed(cfg.seed, "noise"),
    };
    let mut timer = StageTimer::new();

    let g = load_graph(cfg)?;
    let labels = g
        .labels()
        .ok_or_else(|| Error::Config("evaluation needs labels".into()))?
        .to_vec();
    let split = make_inductive_split(
        &g,
        cfg.split.per_class_labeled,
        cfg.split.test_fraction,
        derive_seed(cfg.seed, "split"),
    )?;
    for &t in targets {
        if split.test.binary_search(&t).is_err() {
            return Err(Error::Config(format!("target {t} is not a test node")));
        }
    }
    if targets.is_empty() {
        return Err(Error::Config("no attack targets given".into()));
    }
    timer.mark("load");

    let train_nodes = split.train_nodes();
    let g_train = g.induced_subgraph(&train_nodes);
    let e_ratio = edge_ratio(&g_train);
    let mut rewirer = None;
    if let Some(kind) = cfg.augmenter.kind {
        let params = get_augmenter(cfg, &g_train, kind)?;
        let scores = Arc::new(score_matrix(&g, &params, cfg.augmenter.candidate_k)?);
        let th = noise_adaptive_thresholds(&scores, &g, e_ratio, &noise)?;
        rewirer = Some(Rewirer::new(scores, th));
    }
    timer.mark("augment");

    let train_noise = cfg.train.with_noise.then(|| SparseNoiseConfig {
        p_plus: sparse.p_plus,
        p_minus: sparse.p_minus,
        seed: derive_seed(cfg.seed, "train-noise"),
    });
    let params = get_classifier(cfg, &g, &split, train_noise, None)?;
    let model = GcnModel::new(g.features(), params);
    timer.mark("train");

    let before = smooth_tallies(
        &g,
        &model,
        rewirer.as_ref(),
        &noise,
        cfg.certify.n_samples,
        &cfg.filter,
    )?;
    let hits_before = targets
        .iter()
        .filter(|&&t| smoothed_correct(&before[t as usize], labels[t as usize]))
        .count();
    timer.mark("sample");

    let attack_root = derive_seed(cfg.seed, "attack");
    let hits_after: usize = targets
        .par_iter()
        .map(|&t| -> Result<usize> {
            let mut edges: HashSet<(u32, u32)> = g.edges().iter().copied().collect();
            let mut rng = substream(attack_root, t as u64);
            for _ in 0..attack_budget {
                let mut v = rng.random_range(0..g.n() as u32);
                while v == t {
                    v = rng.random_range(0..g.n() as u32);
                }
                let pair = (t.min(v), t.max(v));
                if !edges.remove(&pair) {
                    edges.insert(pair);
                }
            }
            let attacked = g.with_edges(edges)?;
            let model_att = GcnModel::new(attacked.features(), model.params().clone());
            let tallies = smooth_tallies(
                &attacked,
                &model_att,
                rewirer.as_ref(),
                &noise,
                cfg.certify.n_samples,
                &cfg.filter,
            )?;
            Ok(smoothed_correct(&tallies[t as usize], labels[t as usize]) as usize)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    timer.mark("attack");

    let n = targets.len() as f64;
    let accuracy_before = hits_before as f64 / n;
    let accuracy_after = hits_after as f64 / n;
    let (timings, total_seconds) = timer.finish();
    let report = Report {
        scheme: "attack-eval".into(),
        clean_accuracy: accuracy_before,
        abstain_rate: targets
            .iter()
            .filter(|&&t| before[t as usize].n_valid == 0
                || abstain_test(&before[t as usize], cfg.certify.alpha)
                    == VoteDecision::Abstain)
            .count() as f64
            / n,
        budgets: vec![],
        edge_budgets: vec![],
        radii: vec![],
        stats_before: None,
        stats_after: None,
        empirical: Some(EmpiricalEval {
            attack_budget,
            n_targets: targets.len(),
            accuracy_before,
            accuracy_after,
        }),
        timings,
        total_seconds,
    };
    write_outputs(&cfg.output.dir, cfg, &report, None)?;
    Ok(report)
}

/// Certify/not-certified status lookup on a written grid, used by the
/// attack soundness checks.
pub fn grid_status_name(status: CertStatus) -> &'static str {
    match status {
        CertStatus::Certified => "certified",
        CertStatus::NotCertified => "not_certified",
        CertStatus::Abstain => "abstain",
    }
}
