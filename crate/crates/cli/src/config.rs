//! Run configuration: a flat TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use sasv_core::data::StoreFormat;
use sasv_core::models::ModelKind;
use sasv_core::nn::{OptimizerKind, TrainConfig};
use sasv_core::sampling::SyntheticConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub seed: u64,
    pub out: PathBuf,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub asv_store: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cm_store: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cm_scores: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enrollment: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,

    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// `adam` or `sgd`.
    pub optimizer: String,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub samples_per_epoch: usize,
    pub triplets_per_batch: usize,
    pub margin: f64,
    pub iep_length_norm: bool,

    pub n_speakers: usize,
    pub utts_per_speaker: usize,
    pub spoofs_per_speaker: usize,
    pub enroll_per_speaker: usize,
    pub dev_speakers: usize,
    pub eval_speakers: usize,
    pub nontargets_per_test: usize,
    pub spoof_systems: usize,
    pub asv_dim: usize,
    pub cm_dim: usize,
    pub asv_noise: f64,
    pub speaker_rank: usize,
    pub spoof_asv_spread: f64,
    pub cm_separation: f64,
    /// `binary` or `tsv`, for stores written by `synth`.
    pub store_format: String,

    pub histogram_bins: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let s = SyntheticConfig::default();
        let (adam_beta1, adam_beta2, adam_epsilon) = match OptimizerKind::default() {
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => (beta1, beta2, epsilon),
            OptimizerKind::Sgd => unreachable!("Adam is the default optimizer"),
        };
        Self {
            model: None,
            seed: 0,
            out: PathBuf::from("sasv-out"),
            asv_store: None,
            cm_store: None,
            cm_scores: None,
            protocol: None,
            trials: None,
            enrollment: None,
            checkpoint: None,
            scores: None,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            optimizer: "adam".into(),
            adam_beta1,
            adam_beta2,
            adam_epsilon,
            samples_per_epoch: t.samples_per_epoch,
            triplets_per_batch: t.triplets_per_batch,
            margin: t.margin,
            iep_length_norm: t.iep_length_norm,
            n_speakers: s.n_speakers,
            utts_per_speaker: s.utts_per_speaker,
            spoofs_per_speaker: s.spoofs_per_speaker,
            enroll_per_speaker: s.enroll_per_speaker,
            dev_speakers: s.dev_speakers,
            eval_speakers: s.eval_speakers,
            nontargets_per_test: s.nontargets_per_test,
            spoof_systems: s.spoof_systems,
            asv_dim: s.asv_dim,
            cm_dim: s.cm_dim,
            asv_noise: s.asv_noise,
            speaker_rank: s.speaker_rank,
            spoof_asv_spread: s.spoof_asv_spread,
            cm_separation: s.cm_separation,
            store_format: "binary".into(),
            histogram_bins: sasv_core::metrics::DEFAULT_HISTOGRAM_BINS,
        }
    }
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let table: toml::Table =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let out_given = table.contains_key("out");
        let mut cfg: RunConfig = table
            .try_into()
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in cfg.paths_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if out_given && cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    fn paths_mut(&mut self) -> [&mut Option<PathBuf>; 8] {
        [
            &mut self.asv_store,
            &mut self.cm_store,
            &mut self.cm_scores,
            &mut self.protocol,
            &mut self.trials,
            &mut self.enrollment,
            &mut self.checkpoint,
            &mut self.scores,
        ]
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// `None` when no model was configured.
    pub fn model_kind(&self) -> anyhow::Result<Option<ModelKind>> {
        self.model
            .as_deref()
            .map(|m| m.parse::<ModelKind>().map_err(anyhow::Error::from))
            .transpose()
    }

    pub fn train_config(&self) -> anyhow::Result<TrainConfig> {
        let optimizer = match self.optimizer.as_str() {
            "adam" => OptimizerKind::Adam {
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                epsilon: self.adam_epsilon,
            },
            "sgd" => OptimizerKind::Sgd,
            other => bail!("unknown optimizer {other:?}; expected adam or sgd"),
        };
        let cfg = TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer,
            seed: self.seed,
            samples_per_epoch: self.samples_per_epoch,
            triplets_per_batch: self.triplets_per_batch,
            margin: self.margin,
            iep_length_norm: self.iep_length_norm,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn synthetic_config(&self) -> anyhow::Result<SyntheticConfig> {
        let cfg = SyntheticConfig {
            n_speakers: self.n_speakers,
            utts_per_speaker: self.utts_per_speaker,
            spoofs_per_speaker: self.spoofs_per_speaker,
            enroll_per_speaker: self.enroll_per_speaker,
            dev_speakers: self.dev_speakers,
            eval_speakers: self.eval_speakers,
            nontargets_per_test: self.nontargets_per_test,
            spoof_systems: self.spoof_systems,
            asv_dim: self.asv_dim,
            cm_dim: self.cm_dim,
            asv_noise: self.asv_noise,
            speaker_rank: self.speaker_rank,
            spoof_asv_spread: self.spoof_asv_spread,
            cm_separation: self.cm_separation,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn store_format(&self) -> anyhow::Result<StoreFormat> {
        match self.store_format.as_str() {
            "binary" => Ok(StoreFormat::Binary),
            "tsv" => Ok(StoreFormat::Tsv),
            other => bail!("unknown store_format {other:?}; expected binary or tsv"),
        }
    }

    /// The named path, which must be configured and exist.
    pub fn existing(&self, name: &str) -> anyhow::Result<&Path> {
        let value = match name {
            "asv_store" => &self.asv_store,
            "cm_store" => &self.cm_store,
            "cm_scores" => &self.cm_scores,
            "protocol" => &self.protocol,
            "trials" => &self.trials,
            "enrollment" => &self.enrollment,
            "checkpoint" => &self.checkpoint,
            "scores" => &self.scores,
            other => unreachable!("unknown path key {other}"),
        };
        let path = value.as_deref().with_context(|| {
            format!(
                "{name} is required (config key or --{})",
                name.replace('_', "-")
            )
        })?;
        if !path.exists() {
            bail!("{name} {} does not exist", path.display());
        }
        Ok(path)
    }

    pub fn histogram_bins(&self) -> anyhow::Result<usize> {
        if self.histogram_bins == 0 {
            bail!("histogram_bins must be positive");
        }
        Ok(self.histogram_bins)
    }
}
