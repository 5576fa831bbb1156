//! Model selection, training dispatch and the versioned model file.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Domain, Feature, DEFAULT_FEATURES};
use crate::generative::{Architecture, DensityGenerative, GenerativeError, TrainConfig, DEFAULT_MC_SAMPLES};
use crate::gp::{DensityGp, GpConfig, GpError};
use crate::model::{BoxError, DensityModel, Prediction};

pub const MODEL_FORMAT: &str = "propsurro-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Gp,
    #[serde(alias = "generative")]
    Gen,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gp => "gp",
            ModelKind::Gen => "gen",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gp" => Ok(ModelKind::Gp),
            "gen" | "generative" => Ok(ModelKind::Gen),
            other => Err(format!("unknown model kind `{other}` (expected gp or gen)")),
        }
    }
}

/// Everything needed to train either model kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub features: Vec<Feature>,
    pub gp: GpConfig,
    pub arch: Architecture,
    pub train: TrainConfig,
    /// Monte Carlo draws per generative prediction.
    pub n_samples: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Gp,
            features: DEFAULT_FEATURES.to_vec(),
            gp: GpConfig::default(),
            arch: Architecture::default(),
            train: TrainConfig::default(),
            n_samples: DEFAULT_MC_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Generative(#[from] GenerativeError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Gp(DensityGp),
    Gen(DensityGenerative),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Gp(_) => ModelKind::Gp,
            TrainedModel::Gen(_) => ModelKind::Gen,
        }
    }

    pub fn features(&self) -> &[Feature] {
        match self {
            TrainedModel::Gp(m) => &m.features,
            TrainedModel::Gen(m) => &m.features,
        }
    }

    pub fn predict(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Result<Prediction, TrainError> {
        Ok(match self {
            TrainedModel::Gp(m) => m.predict(pressure, temperature, carbon_count)?,
            TrainedModel::Gen(m) => m.predict(pressure, temperature, carbon_count)?,
        })
    }

    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<Prediction>, TrainError> {
        Ok(match self {
            TrainedModel::Gp(m) => m.predict_dataset(d)?,
            TrainedModel::Gen(m) => m.predict_dataset(d)?,
        })
    }
}

impl DensityModel for TrainedModel {
    fn predict_state(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Result<Prediction, BoxError> {
        Ok(self.predict(pressure, temperature, carbon_count)?)
    }
}

pub fn train_model(train: &Dataset, spec: &ModelSpec) -> Result<TrainedModel, TrainError> {
    Ok(match spec.kind {
        ModelKind::Gp => TrainedModel::Gp(DensityGp::fit(train, &spec.features, &spec.gp)?),
        ModelKind::Gen => {
            let (mut m, report) = DensityGenerative::train(train, &spec.features, &spec.arch, &spec.train)?;
            log::info!(
                "generative training: {} discriminator / {} generator updates, final losses {:.4} / {:.4}",
                report.disc_updates,
                report.gen_updates,
                report.final_disc_loss,
                report.final_gen_loss
            );
            m.n_samples = spec.n_samples;
            TrainedModel::Gen(m)
        }
    })
}

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Parse(String),
    #[error("not a model file (format `{0}`)")]
    WrongFormat(String),
    #[error("model file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u32 },
}

/// A trained model with the state box it was fitted on.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub model: TrainedModel,
    pub domain: Domain,
}

#[derive(Serialize)]
struct FileOut<'a> {
    format: &'static str,
    version: u32,
    #[serde(flatten)]
    file: &'a ModelFile,
}

pub fn model_to_json(file: &ModelFile) -> String {
    serde_json::to_string(&FileOut { format: MODEL_FORMAT, version: MODEL_FORMAT_VERSION, file }).expect("models serialize")
}

pub fn model_from_json(text: &str) -> Result<ModelFile, ModelFileError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelFileError::Parse(e.to_string()))?;
    let format = v.get("format").and_then(|f| f.as_str()).unwrap_or("");
    if format != MODEL_FORMAT {
        return Err(ModelFileError::WrongFormat(format.to_string()));
    }
    let version = v.get("version").and_then(|x| x.as_u64()).ok_or_else(|| ModelFileError::Parse("missing version".into()))?;
    if version != u64::from(MODEL_FORMAT_VERSION) {
        return Err(ModelFileError::VersionMismatch { found: version, expected: MODEL_FORMAT_VERSION });
    }
    let field = |k: &str| v.get(k).cloned().ok_or_else(|| ModelFileError::Parse(format!("missing {k}")));
    let model = serde_json::from_value(field("model")?).map_err(|e| ModelFileError::Parse(e.to_string()))?;
    let domain = serde_json::from_value(field("domain")?).map_err(|e| ModelFileError::Parse(e.to_string()))?;
    Ok(ModelFile { model, domain })
}

pub fn save_model(file: &ModelFile, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    std::fs::write(path, model_to_json(file))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile, ModelFileError> {
    model_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{generate_table, OracleParams};

    fn small_gp() -> ModelFile {
        let d = generate_table(&[3.0, 10.0], &[320.0, 400.0, 480.0, 560.0], &[12], &OracleParams::default()).unwrap();
        let spec = ModelSpec { gp: GpConfig { restarts: 1, ..Default::default() }, ..Default::default() };
        ModelFile { model: train_model(&d, &spec).unwrap(), domain: Domain::of(&d).unwrap() }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("gp".parse::<ModelKind>().unwrap(), ModelKind::Gp);
        assert_eq!("GEN".parse::<ModelKind>().unwrap(), ModelKind::Gen);
        assert!("svm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let f = small_gp();
        assert_eq!(f.model.features(), &[Feature::LogPressure, Feature::Temperature]);
        let back = model_from_json(&model_to_json(&f)).unwrap();
        assert_eq!(back.model.kind(), ModelKind::Gp);
        assert_eq!(back.domain, f.domain);
        assert_eq!(f.model.predict(5.0, 450.0, 12).unwrap(), back.model.predict(5.0, 450.0, 12).unwrap());
    }

    #[test]
    fn version_and_format_checked() {
        let text = model_to_json(&small_gp());
        let bumped = text.replacen("\"version\":1", "\"version\":99", 1);
        assert!(matches!(model_from_json(&bumped), Err(ModelFileError::VersionMismatch { found: 99, .. })));
        let wrong = text.replacen(MODEL_FORMAT, "other", 1);
        assert!(matches!(model_from_json(&wrong), Err(ModelFileError::WrongFormat(_))));
        assert!(matches!(model_from_json("{"), Err(ModelFileError::Parse(_))));
    }
}
