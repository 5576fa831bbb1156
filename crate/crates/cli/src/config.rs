//! TOML run configuration. Every field has a default and unknown keys are
//! rejected, so a typo surfaces as a config error instead of a silent default.

use std::path::{Path, PathBuf};

use propsurro::dataset::{Feature, SplitSpec, DEFAULT_FEATURES};
use propsurro::generative::{Architecture, TrainConfig, DEFAULT_MC_SAMPLES};
use propsurro::gp::GpConfig;
use propsurro::metrics::CvMapSpec;
use propsurro::multifidelity::DEFAULT_NARGP_SAMPLES;
use propsurro::surrogate::{ModelKind, ModelSpec};
use propsurro::synthdata::{Discrepancy, FusionSetup, MfSetup, OracleParams};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Overrides every per-section seed when set.
    pub seed: Option<u64>,
    /// Output directory; `out` when unset.
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    pub oracle: OracleParams,
    pub discrepancy: Discrepancy,
    pub split: SplitSpec,
    pub model: ModelConfig,
    pub gp: GpConfig,
    pub architecture: Architecture,
    pub training: TrainConfig,
    pub predict: PredictConfig,
    pub evaluate: EvaluateConfig,
    pub cvmap: CvMapSpec,
    pub fuse: FuseConfig,
    pub mf: MfConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Training table; `<out>/low_fidelity.csv` when unset.
    pub path: Option<PathBuf>,
    /// Fuels written by `generate`; all grid fuels when empty.
    pub carbons: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub features: Vec<Feature>,
    pub n_samples: usize,
    /// Model file; `<out>/model.json` when unset.
    pub path: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kind: ModelKind::Gp, features: DEFAULT_FEATURES.to_vec(), n_samples: DEFAULT_MC_SAMPLES, path: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    pub pressures: Vec<f64>,
    pub temperature_range: (f64, f64),
    pub temperature_step: f64,
    pub carbon_count: u32,
    /// Optional table of reference densities to overlay and score.
    pub reference: Option<PathBuf>,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self { pressures: vec![3.0, 10.0, 100.0], temperature_range: (320.0, 900.0), temperature_step: 10.0, carbon_count: 12, reference: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    /// Table to score; the held-out part of the training table when unset.
    pub data: Option<PathBuf>,
}

/// Inputs of the fusion study. Unset paths fall back to the synthetic
/// analog described by `setup`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FuseConfig {
    pub base: Option<PathBuf>,
    pub extra: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub setup: FusionSetup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfConfig {
    pub low: Option<PathBuf>,
    pub high: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub setup: MfSetup,
    pub nargp_samples: usize,
    /// Update cycle of the multi-fidelity generative model; replaces the
    /// `[training]` values.
    pub disc_updates: usize,
    pub gen_updates: usize,
    pub steps: usize,
}

impl Default for MfConfig {
    fn default() -> Self {
        Self {
            low: None,
            high: None,
            truth: None,
            setup: MfSetup::default(),
            nargp_samples: DEFAULT_NARGP_SAMPLES,
            disc_updates: 1,
            gen_updates: 5,
            steps: 20_000,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Pushes the global seed into every section that owns one.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.split.seed = seed;
        self.gp.seed = seed;
        self.training.seed = seed;
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn data_path(&self) -> PathBuf {
        self.data.path.clone().unwrap_or_else(|| self.out_dir().join("low_fidelity.csv"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.path.clone().unwrap_or_else(|| self.out_dir().join("model.json"))
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.model.kind,
            features: self.model.features.clone(),
            gp: self.gp.clone(),
            arch: self.architecture.clone(),
            train: self.training.clone(),
            n_samples: self.model.n_samples,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.model.features.is_empty() {
            return Err("model.features must not be empty".into());
        }
        if self.model.n_samples < 2 {
            return Err("model.n_samples must be at least 2".into());
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction <= 1.0) {
            return Err(format!("split.train_fraction must be in (0, 1], got {}", self.split.train_fraction));
        }
        if !(self.split.subset_fraction > 0.0 && self.split.subset_fraction <= 1.0) {
            return Err(format!("split.subset_fraction must be in (0, 1], got {}", self.split.subset_fraction));
        }
        if self.gp.restarts == 0 {
            return Err("gp.restarts must be at least 1".into());
        }
        self.training.validate().map_err(|e| e.to_string())?;
        Ok(())
    }
}
