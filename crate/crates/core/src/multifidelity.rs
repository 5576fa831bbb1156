//! Two-level multi-fidelity models and the data-fusion study.
//!
//! * NARGP: a GP on low-fidelity data, then a GP on the high-fidelity data
//!   with the input augmented by the low-fidelity posterior mean. Prediction
//!   propagates the low-fidelity uncertainty by sampling.
//! * Multi-fidelity generative model: a GP proxy for the low-fidelity source
//!   feeds `(x, γ_L)` into a conditional generative model for `γ_H`.
//! * Fusion: retrain a single-fidelity model after concatenating 0, 1, 2, ...
//!   trusted points, and score each arm against a reference curve.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{active_features, Dataset, DatasetError, Feature};
use crate::generative::{Architecture, GenerativeError, GenerativeModel, TrainConfig};
use crate::gp::{GpConfig, GpError, GpModel};
use crate::metrics::relative_error;
use crate::model::{BoxError, DensityModel, Prediction};
use crate::numerics::rng::{derive_seed, seeded, standard_normal};
use crate::numerics::Matrix;
use crate::surrogate::{train_model, ModelSpec, TrainError, TrainedModel};

pub const DEFAULT_NARGP_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MfError {
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Generative(#[from] GenerativeError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("the {0}-fidelity dataset is empty")]
    EmptyFidelity(&'static str),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Clone, Debug)]
pub struct FidelityPair {
    pub low: Dataset,
    pub high: Dataset,
}

impl FidelityPair {
    pub fn new(low: Dataset, high: Dataset) -> Result<Self, MfError> {
        if low.is_empty() {
            return Err(MfError::EmptyFidelity("low"));
        }
        if high.is_empty() {
            return Err(MfError::EmptyFidelity("high"));
        }
        Ok(Self { low, high })
    }

    /// Features that vary over the high-fidelity data; both levels use them.
    pub fn features(&self, candidates: &[Feature]) -> Result<Vec<Feature>, MfError> {
        Ok(active_features(&self.high, candidates)?)
    }
}

fn augment(x: &Matrix, col: &[f64]) -> Matrix {
    x.append_column(col).expect("column length matches rows")
}

/// Law of total variance over conditional predictions: mean of means, and
/// mean of variances plus the population variance of the means.
pub fn pool(conditionals: &[Prediction]) -> Prediction {
    let n = conditionals.len() as f64;
    let mean = conditionals.iter().map(|p| p.mean).sum::<f64>() / n;
    let within = conditionals.iter().map(|p| p.variance).sum::<f64>() / n;
    let between = conditionals.iter().map(|p| (p.mean - mean).powi(2)).sum::<f64>() / n;
    Prediction { mean, variance: within + between, samples: Some(conditionals.len()) }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NargpModel {
    pub low_gp: GpModel,
    pub high_gp: GpModel,
}

impl NargpModel {
    pub fn fit(x_low: &Matrix, y_low: &[f64], x_high: &Matrix, y_high: &[f64], cfg: &GpConfig) -> Result<Self, MfError> {
        if x_low.rows() == 0 {
            return Err(MfError::EmptyFidelity("low"));
        }
        if x_high.rows() == 0 {
            return Err(MfError::EmptyFidelity("high"));
        }
        if x_low.cols() != x_high.cols() {
            return Err(MfError::DimensionMismatch { expected: x_low.cols(), found: x_high.cols() });
        }
        let low_gp = GpModel::fit(x_low, y_low, cfg)?;
        let mu: Vec<f64> = (0..x_high.rows()).map(|i| low_gp.predict_mean(x_high.row(i))).collect::<Result<_, _>>()?;
        let high_cfg = GpConfig { seed: derive_seed(cfg.seed, 1), ..cfg.clone() };
        let high_gp = GpModel::fit(&augment(x_high, &mu), y_high, &high_cfg)?;
        Ok(Self { low_gp, high_gp })
    }

    pub fn input_dim(&self) -> usize {
        self.low_gp.input_dim()
    }

    /// The `n_samples` conditional high-fidelity predictions, one per draw
    /// of the low-fidelity latent posterior at `xq`.
    pub fn conditionals(&self, xq: &[f64], n_samples: usize, seed: u64) -> Result<Vec<Prediction>, MfError> {
        if n_samples < 2 {
            return Err(MfError::TooFewSamples(n_samples));
        }
        if xq.len() != self.input_dim() {
            return Err(MfError::DimensionMismatch { expected: self.input_dim(), found: xq.len() });
        }
        let low = self.low_gp.predict_latent(xq)?;
        let sd = low.sd();
        let mut rng = seeded(seed);
        let mut row = xq.to_vec();
        row.push(0.0);
        let last = row.len() - 1;
        (0..n_samples)
            .map(|_| {
                row[last] = low.mean + sd * standard_normal(&mut rng);
                Ok(self.high_gp.predict(&row)?)
            })
            .collect()
    }

    pub fn predict(&self, xq: &[f64], n_samples: usize, seed: u64) -> Result<Prediction, MfError> {
        Ok(pool(&self.conditionals(xq, n_samples, seed)?))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MfGenerativeModel {
    pub low_proxy: GpModel,
    pub core: GenerativeModel,
}

impl MfGenerativeModel {
    pub fn fit(
        x_low: &Matrix,
        y_low: &[f64],
        x_high: &Matrix,
        y_high: &[f64],
        proxy_cfg: &GpConfig,
        arch: &Architecture,
        cfg: &TrainConfig,
    ) -> Result<Self, MfError> {
        if x_low.rows() == 0 {
            return Err(MfError::EmptyFidelity("low"));
        }
        if x_high.rows() == 0 {
            return Err(MfError::EmptyFidelity("high"));
        }
        if x_low.cols() != x_high.cols() {
            return Err(MfError::DimensionMismatch { expected: x_low.cols(), found: x_high.cols() });
        }
        let low_proxy = GpModel::fit(x_low, y_low, proxy_cfg)?;
        let mu: Vec<f64> = (0..x_high.rows()).map(|i| low_proxy.predict_mean(x_high.row(i))).collect::<Result<_, _>>()?;
        let (core, _) = GenerativeModel::train(&augment(x_high, &mu), y_high, arch, cfg)?;
        Ok(Self { low_proxy, core })
    }

    pub fn predict(&self, xq: &[f64], n_samples: usize, seed: u64) -> Result<Prediction, MfError> {
        let mut row = xq.to_vec();
        row.push(self.low_proxy.predict_mean(xq)?);
        Ok(self.core.predict_moments(&row, n_samples, seed)?)
    }
}

/// Either two-level model over density tables.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityMf<M> {
    pub features: Vec<Feature>,
    pub model: M,
    pub n_samples: usize,
    pub seed: u64,
}

impl<M> DensityMf<M> {
    pub fn inputs(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Vec<f64> {
        self.features.iter().map(|f| f.of_state(pressure, temperature, carbon_count)).collect()
    }
}

pub fn nargp_fit(pair: &FidelityPair, candidates: &[Feature], cfg: &GpConfig, n_samples: usize) -> Result<DensityMf<NargpModel>, MfError> {
    let features = pair.features(candidates)?;
    let model = NargpModel::fit(
        &pair.low.design_matrix(&features),
        &pair.low.densities(),
        &pair.high.design_matrix(&features),
        &pair.high.densities(),
        cfg,
    )?;
    Ok(DensityMf { features, model, n_samples, seed: derive_seed(cfg.seed, 0x4e) })
}

pub fn mf_generative_fit(
    pair: &FidelityPair,
    candidates: &[Feature],
    proxy_cfg: &GpConfig,
    arch: &Architecture,
    cfg: &TrainConfig,
    n_samples: usize,
) -> Result<DensityMf<MfGenerativeModel>, MfError> {
    let features = pair.features(candidates)?;
    let model = MfGenerativeModel::fit(
        &pair.low.design_matrix(&features),
        &pair.low.densities(),
        &pair.high.design_matrix(&features),
        &pair.high.densities(),
        proxy_cfg,
        arch,
        cfg,
    )?;
    Ok(DensityMf { features, model, n_samples, seed: derive_seed(cfg.seed, 0x4d) })
}

impl DensityMf<NargpModel> {
    pub fn predict(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Result<Prediction, MfError> {
        self.model.predict(&self.inputs(pressure, temperature, carbon_count), self.n_samples, self.seed)
    }
}

impl DensityMf<MfGenerativeModel> {
    pub fn predict(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Result<Prediction, MfError> {
        self.model.predict(&self.inputs(pressure, temperature, carbon_count), self.n_samples, self.seed)
    }
}

impl DensityModel for DensityMf<NargpModel> {
    fn predict_state(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Result<Prediction, BoxError> {
        Ok(self.predict(pressure, temperature, carbon_count)?)
    }
}

impl DensityModel for DensityMf<MfGenerativeModel> {
    fn predict_state(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Result<Prediction, BoxError> {
        Ok(self.predict(pressure, temperature, carbon_count)?)
    }
}

/// One line of a fusion or multi-fidelity report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub n_added: usize,
    pub pressure_mpa: f64,
    pub temperature_k: f64,
    pub mean: f64,
    pub sd: f64,
    pub ref_value: f64,
    pub rel_error: f64,
}

/// Error of one arm at one of the points it was given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorCheck {
    pub n_added: usize,
    pub pressure_mpa: f64,
    pub temperature_k: f64,
    pub error_before: f64,
    pub error_after: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub rows: Vec<ReportRow>,
    pub anchors: Vec<AnchorCheck>,
    pub failures: Vec<ArmFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmFailure {
    pub n_added: usize,
    pub message: String,
}

impl FusionReport {
    pub fn arm(&self, n_added: usize) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.n_added == n_added)
    }

    /// Largest relative error of an arm over reference temperatures in `[lo, hi]`.
    pub fn max_rel_error(&self, n_added: usize, lo: f64, hi: f64) -> Option<f64> {
        self.arm(n_added)
            .filter(|r| r.temperature_k >= lo && r.temperature_k <= hi)
            .map(|r| r.rel_error)
            .fold(None, |m, e| Some(m.map_or(e, |m: f64| m.max(e))))
    }

    /// Whether no added point got worse after fusion.
    pub fn anchors_improve(&self) -> bool {
        self.anchors.iter().all(|a| a.error_after <= a.error_before)
    }
}

pub fn write_report<W: Write>(rows: &[ReportRow], w: W) -> Result<(), MfError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(|e| MfError::Io(e.to_string()))?;
    }
    wr.flush().map_err(|e| MfError::Io(e.to_string()))
}

/// Trains one model per arm `n = 0..=extra.len()` on `base` fused with the
/// first `n` extra points, and scores every arm against `reference`.
///
/// An arm that fails to train is recorded in `failures`; the other arms are
/// still scored. Anchor checks need the unfused arm and are skipped without it.
pub fn fusion_experiment(base: &Dataset, extra: &Dataset, reference: &Dataset, spec: &ModelSpec) -> Result<FusionReport, MfError> {
    let arms: Vec<usize> = (0..=extra.len()).collect();
    let fitted: Vec<Result<TrainedModel, MfError>> = arms
        .par_iter()
        .map(|&n| {
            let idx: Vec<usize> = (0..n).collect();
            let train = base.fuse(&extra.subset(&idx))?;
            Ok(train_model(&train, spec)?)
        })
        .collect();

    let name = spec.kind.as_str();
    let mut report = FusionReport::default();
    let baseline = fitted[0].as_ref().ok();
    for (&n, fit) in arms.iter().zip(&fitted) {
        let model = match fit {
            Ok(m) => m,
            Err(e) => {
                report.failures.push(ArmFailure { n_added: n, message: e.to_string() });
                continue;
            }
        };
        for (r, p) in reference.points().iter().zip(model.predict_dataset(reference)?) {
            report.rows.push(ReportRow {
                model: name.to_string(),
                n_added: n,
                pressure_mpa: r.pressure,
                temperature_k: r.temperature,
                mean: p.mean,
                sd: p.sd(),
                ref_value: r.density,
                rel_error: relative_error(r.density, p.mean),
            });
        }
        let Some(before_model) = baseline else { continue };
        for a in &extra.points()[..n] {
            let before = before_model.predict(a.pressure, a.temperature, a.carbon_count)?;
            let after = model.predict(a.pressure, a.temperature, a.carbon_count)?;
            report.anchors.push(AnchorCheck {
                n_added: n,
                pressure_mpa: a.pressure,
                temperature_k: a.temperature,
                error_before: relative_error(a.density, before.mean),
                error_after: relative_error(a.density, after.mean),
            });
        }
    }
    Ok(report)
}

/// Scores any density model against reference points.
pub fn score_rows(model: &dyn DensityModel, name: &str, n_added: usize, reference: &Dataset) -> Result<Vec<ReportRow>, BoxError> {
    reference
        .points()
        .iter()
        .map(|r| {
            let p = model.predict_state(r.pressure, r.temperature, r.carbon_count)?;
            Ok(ReportRow {
                model: name.to_string(),
                n_added,
                pressure_mpa: r.pressure,
                temperature_k: r.temperature,
                mean: p.mean,
                sd: p.sd(),
                ref_value: r.density,
                rel_error: relative_error(r.density, p.mean),
            })
        })
        .collect()
}
