//! Tabular density data: points, CSV ingestion, standardization, splitting and
//! fusion of extra (high-fidelity) points into a base table.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::rng::{derive_seed, seeded, shuffle};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: column `{column}` is not a number ({value:?})")]
    NonNumericCell { row: usize, column: String, value: String },
    #[error("row {row}: column `{column}` must be positive")]
    NonPositiveValue { row: usize, column: String },
    #[error("row {row}: unknown fidelity {value:?} (expected low or high)")]
    InvalidFidelity { row: usize, value: String },
    #[error("duplicate point {0}")]
    DuplicateKey(StateKey),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("feature `{feature}` has zero variance")]
    ZeroVariance { feature: String },
    #[error("fusion key collision at {key}: {base} vs {extra} kg/m3")]
    KeyCollision { key: StateKey, base: f64, extra: f64 },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid data point: {0}")]
    InvalidPoint(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    Low,
    High,
}

impl Fidelity {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Some(Fidelity::Low),
            "high" => Some(Fidelity::High),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Fidelity::Low => "low",
            Fidelity::High => "high",
        }
    }
}

/// One labeled observation: density (kg/m³) at pressure (MPa), temperature (K)
/// and carbon count of the n-alkane CₙH₂ₙ₊₂.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub pressure: f64,
    pub temperature: f64,
    pub carbon_count: u32,
    pub density: f64,
    pub fidelity: Fidelity,
}

/// Thermodynamic state identifying a point, ignoring its density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateKey {
    pub pressure: f64,
    pub temperature: f64,
    pub carbon_count: u32,
}

impl StateKey {
    fn bits(&self) -> (u64, u64, u32) {
        (self.pressure.to_bits(), self.temperature.to_bits(), self.carbon_count)
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(p={} MPa, T={} K, C={})", self.pressure, self.temperature, self.carbon_count)
    }
}

impl DataPoint {
    pub fn new(
        pressure: f64,
        temperature: f64,
        carbon_count: u32,
        density: f64,
        fidelity: Fidelity,
    ) -> Result<Self, DatasetError> {
        let p = Self { pressure, temperature, carbon_count, density, fidelity };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.pressure) || !positive(self.temperature) || !positive(self.density) {
            return Err(DatasetError::InvalidPoint(format!(
                "p={}, T={}, rho={} must all be positive",
                self.pressure, self.temperature, self.density
            )));
        }
        if self.carbon_count < 1 {
            return Err(DatasetError::InvalidPoint("carbon_count must be >= 1".into()));
        }
        Ok(())
    }

    pub fn key(&self) -> StateKey {
        StateKey { pressure: self.pressure, temperature: self.temperature, carbon_count: self.carbon_count }
    }
}

/// Model input features derived from a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Pressure,
    /// Natural log of pressure; the pressure grid spans two decades.
    LogPressure,
    Temperature,
    CarbonCount,
}

impl Feature {
    pub fn name(self) -> &'static str {
        match self {
            Feature::Pressure => "pressure_mpa",
            Feature::LogPressure => "log_pressure",
            Feature::Temperature => "temperature_k",
            Feature::CarbonCount => "carbon_count",
        }
    }

    pub fn of_state(self, pressure: f64, temperature: f64, carbon_count: u32) -> f64 {
        match self {
            Feature::Pressure => pressure,
            Feature::LogPressure => pressure.ln(),
            Feature::Temperature => temperature,
            Feature::CarbonCount => f64::from(carbon_count),
        }
    }

    pub fn of(self, p: &DataPoint) -> f64 {
        self.of_state(p.pressure, p.temperature, p.carbon_count)
    }
}

/// The model input layout used throughout: log-pressure, temperature, carbon count.
pub const DEFAULT_FEATURES: [Feature; 3] = [Feature::LogPressure, Feature::Temperature, Feature::CarbonCount];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    points: Vec<DataPoint>,
}

impl Dataset {
    /// Builds a dataset, rejecting invalid points and duplicate
    /// (pressure, temperature, carbon count, fidelity) keys.
    pub fn new(name: impl Into<String>, points: Vec<DataPoint>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            p.validate()?;
            if !seen.insert((p.key().bits(), p.fidelity)) {
                return Err(DatasetError::DuplicateKey(p.key()));
            }
        }
        Ok(Self { name: name.into(), points })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self { name: name.into(), points: Vec::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &DataPoint> {
        self.points.iter()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { name: self.name.clone(), points: idx.iter().map(|&i| self.points[i]).collect() }
    }

    pub fn filter(&self, mut keep: impl FnMut(&DataPoint) -> bool) -> Dataset {
        Dataset { name: self.name.clone(), points: self.points.iter().filter(|p| keep(p)).copied().collect() }
    }

    pub fn densities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.density).collect()
    }

    pub fn design_matrix(&self, features: &[Feature]) -> Matrix {
        Matrix::from_fn(self.len(), features.len(), |i, j| features[j].of(&self.points[i]))
    }

    /// Random train/test split; see [`split_indices`].
    pub fn split(&self, spec: &SplitSpec) -> Result<(Dataset, Dataset), DatasetError> {
        let (train, test) = split_indices(self.len(), spec)?;
        Ok((self.subset(&train), self.subset(&test)))
    }

    /// Concatenates `extra` onto this dataset, tagging the extra points as
    /// high fidelity. A point in `extra` whose state already exists in `self`
    /// with a different density is a collision; an exact repeat is dropped.
    pub fn fuse(&self, extra: &Dataset) -> Result<Dataset, DatasetError> {
        let mut by_state: HashMap<(u64, u64, u32), f64> = HashMap::with_capacity(self.len() + extra.len());
        for p in &self.points {
            by_state.insert(p.key().bits(), p.density);
        }
        let mut points = self.points.clone();
        for p in &extra.points {
            match by_state.get(&p.key().bits()) {
                Some(&d) if d == p.density => continue,
                Some(&d) => return Err(DatasetError::KeyCollision { key: p.key(), base: d, extra: p.density }),
                None => {
                    by_state.insert(p.key().bits(), p.density);
                    points.push(DataPoint { fidelity: Fidelity::High, ..*p });
                }
            }
        }
        Ok(Dataset { name: self.name.clone(), points })
    }

    pub fn load_csv(path: impl AsRef<Path>, fidelity_default: Fidelity) -> Result<Dataset, DatasetError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::read_csv(file, name, fidelity_default)
    }

    /// Parses the dataset CSV format. Columns are matched by header name;
    /// `row` in errors is the 1-based data row (the header is row 0).
    pub fn read_csv<R: Read>(reader: R, name: impl Into<String>, fidelity_default: Fidelity) -> Result<Dataset, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| DatasetError::Csv(e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let need = |name: &str| col(name).ok_or_else(|| DatasetError::MissingColumn(name.to_string()));
        let ip = need("pressure_mpa")?;
        let it = need("temperature_k")?;
        let ic = need("carbon_count")?;
        let id = need("density_kgm3")?;
        let ifid = col("fidelity");

        let mut points = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let row = k + 1;
            let rec = rec.map_err(|e| DatasetError::Csv(e.to_string()))?;
            let cell = |i: usize| rec.get(i).unwrap_or("");
            let number = |i: usize, column: &str| -> Result<f64, DatasetError> {
                let v: f64 = cell(i).parse().map_err(|_| DatasetError::NonNumericCell {
                    row,
                    column: column.to_string(),
                    value: cell(i).to_string(),
                })?;
                if !v.is_finite() {
                    return Err(DatasetError::NonNumericCell { row, column: column.into(), value: cell(i).into() });
                }
                if v <= 0.0 {
                    return Err(DatasetError::NonPositiveValue { row, column: column.to_string() });
                }
                Ok(v)
            };
            let pressure = number(ip, "pressure_mpa")?;
            let temperature = number(it, "temperature_k")?;
            let density = number(id, "density_kgm3")?;
            let carbon_count: u32 = match cell(ic).parse::<i64>() {
                Ok(c) if c >= 1 => c as u32,
                Ok(_) => return Err(DatasetError::NonPositiveValue { row, column: "carbon_count".into() }),
                Err(_) => {
                    return Err(DatasetError::NonNumericCell {
                        row,
                        column: "carbon_count".into(),
                        value: cell(ic).to_string(),
                    })
                }
            };
            let fidelity = match ifid.map(cell) {
                Some(s) if !s.is_empty() => {
                    Fidelity::parse(s).ok_or_else(|| DatasetError::InvalidFidelity { row, value: s.to_string() })?
                }
                _ => fidelity_default,
            };
            points.push(DataPoint { pressure, temperature, carbon_count, density, fidelity });
        }
        Dataset::new(name, points)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| DatasetError::Csv(e.to_string());
        w.write_record(["pressure_mpa", "temperature_k", "carbon_count", "density_kgm3", "fidelity"]).map_err(err)?;
        for p in &self.points {
            w.write_record([
                p.pressure.to_string(),
                p.temperature.to_string(),
                p.carbon_count.to_string(),
                p.density.to_string(),
                p.fidelity.as_str().to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| DatasetError::Io(e.to_string()))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Train/test split parameters.
/// Bounding box of the states a model was trained on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub pressure: (f64, f64),
    pub temperature: (f64, f64),
    pub carbon_count: (u32, u32),
}

impl Domain {
    pub fn of(d: &Dataset) -> Option<Domain> {
        let first = d.points.first()?;
        let mut dom = Domain {
            pressure: (first.pressure, first.pressure),
            temperature: (first.temperature, first.temperature),
            carbon_count: (first.carbon_count, first.carbon_count),
        };
        for p in &d.points[1..] {
            dom.pressure = (dom.pressure.0.min(p.pressure), dom.pressure.1.max(p.pressure));
            dom.temperature = (dom.temperature.0.min(p.temperature), dom.temperature.1.max(p.temperature));
            dom.carbon_count = (dom.carbon_count.0.min(p.carbon_count), dom.carbon_count.1.max(p.carbon_count));
        }
        Some(dom)
    }

    pub fn contains(&self, pressure: f64, temperature: f64, carbon_count: u32) -> bool {
        (self.pressure.0..=self.pressure.1).contains(&pressure)
            && (self.temperature.0..=self.temperature.1).contains(&temperature)
            && (self.carbon_count.0..=self.carbon_count.1).contains(&carbon_count)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub subset_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8, subset_fraction: 1.0, seed: 0 }
    }
}

/// Index-level split of `n` items.
///
/// A seeded Fisher–Yates permutation puts `round(train_fraction * n)` indices
/// in the training pool and the rest in the test set. The training set is
/// then an independent draw of `round(subset_fraction * train_fraction * n)`
/// indices from that pool, so the test set does not depend on the subset
/// fraction.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    if n == 0 {
        return Err(DatasetError::EmptyDataset);
    }
    let in_unit = |v: f64| v > 0.0 && v <= 1.0;
    if !in_unit(spec.train_fraction) || !in_unit(spec.subset_fraction) {
        return Err(DatasetError::InvalidSplit(format!(
            "fractions must lie in (0, 1], got train={} subset={}",
            spec.train_fraction, spec.subset_fraction
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    shuffle(&mut seeded(derive_seed(spec.seed, 1)), &mut perm);
    let pool_len = ((spec.train_fraction * n as f64).round() as usize).min(n);
    let mut pool = perm[..pool_len].to_vec();
    let test = perm[pool_len..].to_vec();

    let train_len = ((spec.subset_fraction * spec.train_fraction * n as f64).round() as usize).min(pool_len);
    if train_len < pool_len {
        let stream = 2 + spec.subset_fraction.to_bits();
        shuffle(&mut seeded(derive_seed(spec.seed, stream)), &mut pool);
        pool.truncate(train_len);
    }
    Ok((pool, test))
}

/// Per-feature affine standardization to zero mean and unit (population)
/// standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    /// Fits one mean/sd per column of `x`.
    pub fn fit(x: &Matrix, names: &[String]) -> Result<Self, DatasetError> {
        if x.rows() < 2 {
            return Err(DatasetError::EmptyDataset);
        }
        let n = x.rows() as f64;
        let mut means = Vec::with_capacity(x.cols());
        let mut sds = Vec::with_capacity(x.cols());
        for j in 0..x.cols() {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if !(sd > 1e-12 * mean.abs().max(1.0)) {
                let feature = names.get(j).cloned().unwrap_or_else(|| format!("column {j}"));
                return Err(DatasetError::ZeroVariance { feature });
            }
            means.push(mean);
            sds.push(sd);
        }
        Ok(Self { names: names.to_vec(), means, sds })
    }

    pub fn fit_values(values: &[f64], name: &str) -> Result<Self, DatasetError> {
        let m = Matrix::from_vec(values.len(), 1, values.to_vec()).expect("column vector");
        Self::fit(&m, &[name.to_string()])
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform_value(&self, j: usize, v: f64) -> f64 {
        (v - self.means[j]) / self.sds[j]
    }

    pub fn inverse_value(&self, j: usize, v: f64) -> f64 {
        v * self.sds[j] + self.means[j]
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &v)| self.transform_value(j, v)).collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &v)| self.inverse_value(j, v)).collect()
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        Matrix::from_fn(x.rows(), x.cols(), |i, j| self.transform_value(j, x[(i, j)]))
    }

    pub fn inverse_transform(&self, x: &Matrix) -> Matrix {
        Matrix::from_fn(x.rows(), x.cols(), |i, j| self.inverse_value(j, x[(i, j)]))
    }
}

/// The subset of `candidates` that actually varies over `d`. A table at a
/// single pressure or for a single fuel carries no information along that
/// axis, so models drop it instead of failing.
pub fn active_features(d: &Dataset, candidates: &[Feature]) -> Result<Vec<Feature>, DatasetError> {
    if d.len() < 2 {
        return Err(DatasetError::EmptyDataset);
    }
    let active: Vec<Feature> = candidates
        .iter()
        .copied()
        .filter(|f| {
            let first = f.of(&d.points()[0]);
            d.iter().any(|p| f.of(p) != first)
        })
        .collect();
    match (active.is_empty(), candidates.first()) {
        (true, Some(f)) => Err(DatasetError::ZeroVariance { feature: f.name().to_string() }),
        (true, None) => Err(DatasetError::ZeroVariance { feature: "<none>".to_string() }),
        _ => Ok(active),
    }
}

/// Standardizer over the selected input features of a dataset.
pub fn fit_standardizer(d: &Dataset, features: &[Feature]) -> Result<Standardizer, DatasetError> {
    let names: Vec<String> = features.iter().map(|f| f.name().to_string()).collect();
    Standardizer::fit(&d.design_matrix(features), &names)
}
