//! Experiment configuration: one TOML file describes the whole run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::ScoreKind;
use crate::error::{Error, Result};
use crate::voting::{FilterConfig, FilterKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub augmenter: AugmenterSection,
    pub smoothing: SmoothingSection,
    #[serde(default = "default_filter")]
    pub filter: FilterConfig,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_filter() -> FilterConfig {
    FilterConfig { kind: FilterKind::None, theta: 0.0 }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// TSV dataset on disk: edges, features, labels, optional node ids.
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub node_ids: Option<PathBuf>,
    /// Synthetic stochastic-block-model graph.
    pub sbm: Option<SbmSection>,
    /// Synthetic Gaussian blobs (dense vectors, no graph).
    pub blobs: Option<BlobsSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmSection {
    pub classes: usize,
    pub nodes_per_class: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_signal: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobsSection {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// distance of each class center from the origin
    pub distance: f64,
    /// within-class standard deviation
    pub spread: f64,
    /// fraction of points used for MLP training
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

fn default_train_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub per_class_labeled: usize,
    pub test_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { per_class_labeled: 20, test_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub hidden: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Train on a fresh noisy draw each epoch so the classifier sees
    /// the corruption it will vote under (sparse smoothing only).
    pub with_noise: bool,
    /// Load from here when the file exists, otherwise train and save.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            hidden: 64,
            learning_rate: 1e-3,
            weight_decay: 1e-3,
            max_epochs: 200,
            patience: 30,
            with_noise: true,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmenterSection {
    /// None disables rewiring entirely.
    pub kind: Option<ScoreKind>,
    pub h2: usize,
    pub e: usize,
    pub m: usize,
    pub epochs: usize,
    /// Falls back to the classifier learning rate when unset.
    pub learning_rate: Option<f64>,
    pub candidate_k: usize,
    pub checkpoint: Option<PathBuf>,
}

impl Default for AugmenterSection {
    fn default() -> Self {
        Self {
            kind: None,
            h2: 256,
            e: 64,
            m: 4,
            epochs: 250,
            learning_rate: None,
            candidate_k: crate::augment::DEFAULT_CANDIDATE_K,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSection {
    pub sparse: Option<SparseSection>,
    pub partition: Option<PartitionSection>,
    pub gaussian: Option<GaussianSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseSection {
    pub p_plus: f64,
    pub p_minus: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub t_s: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSection {
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySection {
    pub n_samples: u64,
    pub alpha: f64,
    pub max_ra: u32,
    pub max_rd: u32,
    /// radius grid for Gaussian reports
    pub radius_grid: Vec<f64>,
}

impl Default for CertifySection {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            alpha: 0.001,
            max_ra: 0,
            max_rd: 0,
            radius_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let schemes = [
            self.smoothing.sparse.is_some(),
            self.smoothing.partition.is_some(),
            self.smoothing.gaussian.is_some(),
        ]
        .iter()
        .filter(|s| **s)
        .count();
        if schemes != 1 {
            return Err(Error::Config(format!(
                "exactly one smoothing scheme must be selected, found {schemes}"
            )));
        }
        if self.certify.n_samples < 1 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if !(self.certify.alpha > 0.0 && self.certify.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha {} outside (0, 1)",
                self.certify.alpha
            )));
        }
        self.filter.validate()?;

        let has_paths = self.dataset.edges.is_some()
            || self.dataset.features.is_some()
            || self.dataset.labels.is_some();
        let sources =
            [has_paths, self.dataset.sbm.is_some(), self.dataset.blobs.is_some()]
                .iter()
                .filter(|s| **s)
                .count();
        if sources != 1 {
            return Err(Error::Config(format!(
                "exactly one dataset source must be given, found {sources}"
            )));
        }
        if has_paths
            && (self.dataset.edges.is_none()
                || self.dataset.features.is_none()
                || self.dataset.labels.is_none())
        {
            return Err(Error::Config(
                "a path dataset needs edges, features, and labels".into(),
            ));
        }
        if self.smoothing.gaussian.is_some() && self.dataset.blobs.is_none() {
            return Err(Error::Config(
                "gaussian smoothing needs a dense-vector dataset (blobs)".into(),
            ));
        }
        if self.smoothing.gaussian.is_none() && self.dataset.blobs.is_some() {
            return Err(Error::Config(
                "blob datasets only make sense with gaussian smoothing".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [dataset.sbm]
        classes = 3
        nodes_per_class = 40
        p_in = 0.2
        p_out = 0.02
        feature_dim = 24
        feature_signal = 0.9

        [smoothing.sparse]
        p_plus = 0.2
        p_minus = 0.6
    "#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.certify.n_samples, 10_000);
        assert_eq!(cfg.split.per_class_labeled, 20);
        assert_eq!(cfg.filter.kind, FilterKind::None);
        assert!(cfg.augmenter.kind.is_none());
    }

    #[test]
    fn two_schemes_rejected() {
        let text = format!("{MINIMAL}\n[smoothing.gaussian]\nsigma = 0.5\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn no_scheme_rejected() {
        let text = r#"
            [dataset.sbm]
            classes = 2
            nodes_per_class = 10
            p_in = 0.2
            p_out = 0.02
            feature_dim = 8
            feature_signal = 0.9

            [smoothing]
        "#;
        assert!(ExperimentConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let text = cfg.to_toml_string().unwrap();
        let again = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(text, again.to_toml_string().unwrap());
    }

    #[test]
    fn zero_samples_rejected() {
        let text = format!("{MINIMAL}\n[certify]\nn_samples = 0\nalpha = 0.001\nmax_ra = 0\nmax_rd = 0\nradius_grid = []\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\nbanana = 1\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }
}
