//! Accuracy and uncertainty scores, and the coefficient-of-variation map.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DensityModel, Prediction};
use crate::plot;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {truth} truth values, {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("need at least {needed} values, got {found}")]
    TooFew { needed: usize, found: usize },
    #[error("truth value {index} is zero")]
    ZeroTruthValue { index: usize },
    #[error("truth values are constant")]
    ConstantTruth,
    #[error("predictive mean is zero")]
    ZeroMean,
    #[error("predictive variance {0} is negative")]
    NegativeVariance(f64),
    #[error("invalid map spec: {0}")]
    InvalidSpec(String),
    #[error("i/o: {0}")]
    Io(String),
}

fn check_lengths(truth: &[f64], pred: &[f64], needed: usize) -> Result<(), MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch { truth: truth.len(), pred: pred.len() });
    }
    if truth.len() < needed {
        return Err(MetricsError::TooFew { needed, found: truth.len() });
    }
    Ok(())
}

/// Mean of squared relative errors, `(1/N) Σ ((ρᵢ - ρ̂ᵢ)/ρᵢ)²`.
///
/// Despite the name this is not a norm: there is no square root.
pub fn l2_mre(truth: &[f64], pred: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(truth, pred, 1)?;
    let mut acc = 0.0;
    for (i, (&t, &p)) in truth.iter().zip(pred).enumerate() {
        if t == 0.0 {
            return Err(MetricsError::ZeroTruthValue { index: i });
        }
        let r = (t - p) / t;
        acc += r * r;
    }
    Ok(acc / truth.len() as f64)
}

/// Coefficient of determination.
pub fn r2_score(truth: &[f64], pred: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(truth, pred, 2)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ConstantTruth);
    }
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// `σ / μ`.
pub fn coefficient_of_variation(pred: &Prediction) -> Result<f64, MetricsError> {
    if pred.variance < 0.0 {
        return Err(MetricsError::NegativeVariance(pred.variance));
    }
    if pred.mean == 0.0 {
        return Err(MetricsError::ZeroMean);
    }
    Ok(pred.variance.sqrt() / pred.mean)
}

/// Pointwise relative error `|ρ̂ - ρ| / |ρ|`.
pub fn relative_error(truth: f64, pred: f64) -> f64 {
    (pred - truth).abs() / truth.abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvMapSpec {
    /// Pressure range in decades of MPa.
    pub log10_pressure_min: f64,
    pub log10_pressure_max: f64,
    pub pressure_nodes: usize,
    pub temperature_min: f64,
    pub temperature_max: f64,
    pub temperature_step: f64,
    pub carbon_count: u32,
}

impl Default for CvMapSpec {
    fn default() -> Self {
        Self {
            log10_pressure_min: 0.5,
            log10_pressure_max: 2.5,
            pressure_nodes: 40,
            temperature_min: 320.0,
            temperature_max: 900.0,
            temperature_step: 20.0,
            carbon_count: 8,
        }
    }
}

impl CvMapSpec {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let bad = |m: &str| Err(MetricsError::InvalidSpec(m.to_string()));
        if !(self.log10_pressure_max > self.log10_pressure_min) {
            return bad("pressure range is empty");
        }
        if self.pressure_nodes < 2 {
            return bad("need at least 2 pressure nodes");
        }
        if !(self.temperature_max > self.temperature_min) || !(self.temperature_step > 0.0) {
            return bad("temperature range is empty");
        }
        let k = (self.temperature_max - self.temperature_min) / self.temperature_step;
        if (k - k.round()).abs() > 1e-9 {
            return bad("temperature step does not divide the range");
        }
        Ok(())
    }

    /// Log-uniform pressure nodes, MPa.
    pub fn pressures(&self) -> Vec<f64> {
        let n = self.pressure_nodes;
        (0..n)
            .map(|i| {
                let e = self.log10_pressure_min + (self.log10_pressure_max - self.log10_pressure_min) * i as f64 / (n - 1) as f64;
                10f64.powf(e)
            })
            .collect()
    }

    pub fn temperatures(&self) -> Vec<f64> {
        let k = ((self.temperature_max - self.temperature_min) / self.temperature_step).round() as usize;
        (0..=k).map(|i| self.temperature_min + self.temperature_step * i as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub pressure: f64,
    pub temperature: f64,
    pub mean: f64,
    pub sd: f64,
    pub cv: f64,
    pub valid: bool,
}

/// Cells are stored temperature-major: row `i` holds every pressure at
/// `temperatures[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvMap {
    pub carbon_count: u32,
    pub pressures: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub cells: Vec<CvCell>,
}

impl CvMap {
    pub fn temperature_rows(&self) -> usize {
        self.temperatures.len()
    }

    pub fn cell(&self, ti: usize, pi: usize) -> &CvCell {
        &self.cells[ti * self.pressures.len() + pi]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MetricsError> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| MetricsError::Io(e.to_string());
        wr.write_record(["pressure_mpa", "temperature_k", "mean", "sd", "cv", "valid"]).map_err(io)?;
        for c in &self.cells {
            wr.write_record([
                c.pressure.to_string(),
                c.temperature.to_string(),
                c.mean.to_string(),
                c.sd.to_string(),
                c.cv.to_string(),
                c.valid.to_string(),
            ])
            .map_err(io)?;
        }
        wr.flush().map_err(|e| MetricsError::Io(e.to_string()))
    }

    pub fn to_svg(&self) -> String {
        let xs: Vec<f64> = self.pressures.iter().map(|p| p.log10()).collect();
        let values: Vec<Option<f64>> = self.cells.iter().map(|c| c.valid.then_some(c.cv)).collect();
        plot::heatmap(
            &format!("coefficient of variation, C{}", self.carbon_count),
            "log10 pressure [MPa]",
            "temperature [K]",
            &xs,
            &self.temperatures,
            &values,
        )
    }
}

/// Predicts every grid node and records `cv`. A node whose prediction fails,
/// is non-finite, or has a non-positive mean is kept but marked invalid.
pub fn cv_map(model: &dyn DensityModel, spec: &CvMapSpec) -> Result<CvMap, MetricsError> {
    spec.validate()?;
    let pressures = spec.pressures();
    let temperatures = spec.temperatures();
    let nodes: Vec<(f64, f64)> = temperatures.iter().flat_map(|&t| pressures.iter().map(move |&p| (p, t))).collect();
    let cells = nodes
        .par_iter()
        .map(|&(p, t)| {
            let invalid = CvCell { pressure: p, temperature: t, mean: f64::NAN, sd: f64::NAN, cv: f64::NAN, valid: false };
            match model.predict_state(p, t, spec.carbon_count) {
                Ok(pred) if pred.mean.is_finite() && pred.variance.is_finite() => {
                    let sd = pred.sd();
                    let cv = coefficient_of_variation(&pred).ok().filter(|cv| cv.is_finite() && pred.mean > 0.0);
                    match cv {
                        Some(cv) => CvCell { pressure: p, temperature: t, mean: pred.mean, sd, cv, valid: true },
                        None => CvCell { mean: pred.mean, sd, ..invalid },
                    }
                }
                Ok(_) => invalid,
                Err(e) => {
                    log::warn!("cv map cell (p={p}, T={t}) failed: {e}");
                    invalid
                }
            }
        })
        .collect();
    Ok(CvMap { carbon_count: spec.carbon_count, pressures, temperatures, cells })
}
