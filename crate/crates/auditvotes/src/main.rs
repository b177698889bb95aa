//! Command-line front end for the certification pipelines.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use auditvotes::augment::ScoreKind;
use auditvotes::classify::{export_gcn_json, save_gcn_checkpoint};
use auditvotes::graph::make_inductive_split;
use auditvotes::pipeline::{
    apply_env_overrides, load_graph, run_empirical_eval, run_gaussian_pipeline,
    run_gnncert_pipeline, run_randomized_pipeline, save_augmenter_json, thread_override,
    ExperimentConfig, Report,
};
use auditvotes::voting::FilterKind;
use auditvotes::{Error, Result};

#[derive(Parser)]
#[command(name = "auditvotes", about = "Certified robustness for graph node classifiers", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags that override values from the config file.
#[derive(Args, Clone)]
struct Overrides {
    /// experiment config (TOML)
    #[arg(long, short)]
    config: PathBuf,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// global seed
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample count N
    #[arg(long)]
    n_samples: Option<u64>,
    /// certification confidence level
    #[arg(long)]
    alpha: Option<f64>,
    /// vote filter: none, confidence, homophily, jsd
    #[arg(long)]
    filter: Option<String>,
    /// filter threshold
    #[arg(long)]
    theta: Option<f64>,
    /// edge-addition flip probability
    #[arg(long)]
    p_plus: Option<f64>,
    /// edge-deletion flip probability
    #[arg(long)]
    p_minus: Option<f64>,
    /// Gaussian noise scale
    #[arg(long)]
    sigma: Option<f64>,
    /// subgraph count for hash-partition voting
    #[arg(long)]
    t_s: Option<usize>,
    /// budget grid bounds
    #[arg(long)]
    max_ra: Option<u32>,
    #[arg(long)]
    max_rd: Option<u32>,
    /// augmenter: jaccard, fae, sim, or "none"
    #[arg(long)]
    augmenter: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the base classifier and write its checkpoint.
    Train(Overrides),
    /// Train the augmenter and write its checkpoint.
    TrainAug(Overrides),
    /// Randomized-smoothing certification over the budget grid.
    Certify(Overrides),
    /// De-randomized certification via hash-partitioned voting.
    Gnncert(Overrides),
    /// Gaussian feature-noise certification on dense vectors.
    Gaussian(Overrides),
    /// Random-flip attack evaluation on target nodes.
    AttackEval {
        #[command(flatten)]
        overrides: Overrides,
        /// edges toggled per target
        #[arg(long, default_value_t = 1)]
        budget: u64,
        /// comma-separated target node ids (default: first 20 test nodes)
        #[arg(long, value_delimiter = ',')]
        targets: Vec<u32>,
    },
    /// Print a summary of an existing report.json.
    Report {
        /// directory holding report.json
        #[arg(long, default_value = "out")]
        dir: PathBuf,
    },
}

fn parse_filter(name: &str) -> Result<FilterKind> {
    match name {
        "none" => Ok(FilterKind::None),
        "confidence" => Ok(FilterKind::Confidence),
        "homophily" => Ok(FilterKind::Homophily),
        "jsd" => Ok(FilterKind::Jsd),
        other => Err(Error::Config(format!("unknown filter kind {other:?}"))),
    }
}

fn parse_augmenter(name: &str) -> Result<Option<ScoreKind>> {
    match name {
        "none" => Ok(None),
        "jaccard" => Ok(Some(ScoreKind::Jaccard)),
        "fae" => Ok(Some(ScoreKind::Fae)),
        "sim" => Ok(Some(ScoreKind::Sim)),
        other => Err(Error::Config(format!("unknown augmenter kind {other:?}"))),
    }
}

fn load_config(ov: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(&ov.config)?;
    if let Some(out) = &ov.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(n) = ov.n_samples {
        cfg.certify.n_samples = n;
    }
    if let Some(alpha) = ov.alpha {
        cfg.certify.alpha = alpha;
    }
    if let Some(kind) = &ov.filter {
        cfg.filter.kind = parse_filter(kind)?;
    }
    if let Some(theta) = ov.theta {
        cfg.filter.theta = theta;
    }
    if let Some(p) = ov.p_plus {
        match &mut cfg.smoothing.sparse {
            Some(s) => s.p_plus = p,
            None => return Err(Error::Config("--p-plus needs [smoothing.sparse]".into())),
        }
    }
    if let Some(p) = ov.p_minus {
        match &mut cfg.smoothing.sparse {
            Some(s) => s.p_minus = p,
            None => return Err(Error::Config("--p-minus needs [smoothing.sparse]".into())),
        }
    }
    if let Some(sigma) = ov.sigma {
        match &mut cfg.smoothing.gaussian {
            Some(s) => s.sigma = sigma,
            None => return Err(Error::Config("--sigma needs [smoothing.gaussian]".into())),
        }
    }
    if let Some(t_s) = ov.t_s {
        match &mut cfg.smoothing.partition {
            Some(s) => s.t_s = t_s,
            None => return Err(Error::Config("--t-s needs [smoothing.partition]".into())),
        }
    }
    if let Some(ra) = ov.max_ra {
        cfg.certify.max_ra = ra;
    }
    if let Some(rd) = ov.max_rd {
        cfg.certify.max_rd = rd;
    }
    if let Some(aug) = &ov.augmenter {
        cfg.augmenter.kind = parse_augmenter(aug)?;
    }
    apply_env_overrides(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(report: &Report) {
    println!("scheme          {}", report.scheme);
    println!("clean accuracy  {:.4}", report.clean_accuracy);
    println!("abstain rate    {:.4}", report.abstain_rate);
    for b in &report.budgets {
        println!("certified (ra={}, rd={})  {:.4}", b.ra, b.rd, b.certified_accuracy);
    }
    for b in &report.edge_budgets {
        println!("certified (m={})  {:.4}", b.m, b.certified_accuracy);
    }
    for r in &report.radii {
        println!("certified (radius={:.3})  {:.4}", r.radius, r.certified_accuracy);
    }
    if let Some(e) = &report.empirical {
        println!(
            "attack budget {}: accuracy {:.4} -> {:.4} over {} targets",
            e.attack_budget, e.accuracy_before, e.accuracy_after, e.n_targets
        );
    }
    println!("total           {:.1}s", report.total_seconds);
}

fn cmd_train(ov: &Overrides) -> Result<()> {
    let cfg = load_config(ov)?;
    let g = load_graph(&cfg)?;
    let split = make_inductive_split(
        &g,
        cfg.split.per_class_labeled,
        cfg.split.test_fraction,
        auditvotes::rng::derive_seed(cfg.seed, "split"),
    )?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg
        .train
        .checkpoint
        .clone()
        .unwrap_or_else(|| cfg.output.dir.join("gcn.avcp"));
    // force retraining even when the file exists
    if path.exists() {
        std::fs::remove_file(&path)?;
    }
    let noise = cfg.smoothing.sparse.as_ref().and_then(|s| {
        cfg.train.with_noise.then_some(auditvotes::smoothing::SparseNoiseConfig {
            p_plus: s.p_plus,
            p_minus: s.p_minus,
            seed: auditvotes::rng::derive_seed(cfg.seed, "train-noise"),
        })
    });
    let tc = auditvotes::classify::TrainConfig {
        learning_rate: cfg.train.learning_rate,
        weight_decay: cfg.train.weight_decay,
        max_epochs: cfg.train.max_epochs,
        patience: cfg.train.patience,
        noise,
        seed: auditvotes::rng::derive_seed(cfg.seed, "init"),
    };
    let params = auditvotes::classify::train_classifier(&g, &split, &tc, cfg.train.hidden, None)?;
    save_gcn_checkpoint(&path, &params)?;
    export_gcn_json(path.with_extension("json"), &params)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_train_aug(ov: &Overrides) -> Result<()> {
    let cfg = load_config(ov)?;
    let kind = cfg
        .augmenter
        .kind
        .ok_or_else(|| Error::Config("no augmenter configured".into()))?;
    let g = load_graph(&cfg)?;
    let split = make_inductive_split(
        &g,
        cfg.split.per_class_labeled,
        cfg.split.test_fraction,
        auditvotes::rng::derive_seed(cfg.seed, "split"),
    )?;
    let g_train = g.induced_subgraph(&split.train_nodes());
    std::fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg
        .augmenter
        .checkpoint
        .clone()
        .unwrap_or_else(|| cfg.output.dir.join("augmenter.json"));
    let params = if kind == ScoreKind::Jaccard {
        auditvotes::augment::AugmenterParams::Jaccard
    } else {
        let dims = auditvotes::augment::AugmenterDims {
            h2: cfg.augmenter.h2,
            e: cfg.augmenter.e,
            m: cfg.augmenter.m,
        };
        let tc = auditvotes::classify::TrainConfig {
            learning_rate: cfg.train.learning_rate,
            weight_decay: 0.0,
            max_epochs: cfg.augmenter.epochs,
            patience: cfg.augmenter.epochs,
            noise: None,
            seed: auditvotes::rng::derive_seed(cfg.seed, "aug"),
        };
        auditvotes::augment::train_augmenter(&g_train, kind, &tc, &dims)?.params
    };
    save_augmenter_json(&path, &params)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_report(dir: &PathBuf) -> Result<()> {
    let text = std::fs::read_to_string(dir.join("report.json"))?;
    let report: Report =
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: dir.join("report.json"),
            line: 0,
            msg: e.to_string(),
        })?;
    print_report(&report);
    Ok(())
}

fn run() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(threads) = thread_override() {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(ov) => cmd_train(ov),
        Command::TrainAug(ov) => cmd_train_aug(ov),
        Command::Certify(ov) => {
            let cfg = load_config(ov)?;
            print_report(&run_randomized_pipeline(&cfg)?);
            Ok(())
        }
        Command::Gnncert(ov) => {
            let cfg = load_config(ov)?;
            print_report(&run_gnncert_pipeline(&cfg)?);
            Ok(())
        }
        Command::Gaussian(ov) => {
            let cfg = load_config(ov)?;
            print_report(&run_gaussian_pipeline(&cfg)?);
            Ok(())
        }
        Command::AttackEval { overrides, budget, targets } => {
            let cfg = load_config(overrides)?;
            let targets = if targets.is_empty() {
                let g = load_graph(&cfg)?;
                let split = make_inductive_split(
                    &g,
                    cfg.split.per_class_labeled,
                    cfg.split.test_fraction,
                    auditvotes::rng::derive_seed(cfg.seed, "split"),
                )?;
                split.test.iter().copied().take(20).collect()
            } else {
                targets.clone()
            };
            print_report(&run_empirical_eval(&cfg, *budget, &targets)?);
            Ok(())
        }
        Command::Report { dir } => cmd_report(dir),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Numeric(_)) => {
            eprintln!("numeric failure: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
