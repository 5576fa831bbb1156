//! Exact Gaussian-process regression with an ARD Matérn-3/2 kernel.
//!
//! Inputs and targets are standardized before fitting; hyperparameters are
//! fitted by maximizing the log marginal likelihood in log-parameter space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{active_features, Dataset, DatasetError, Feature, Standardizer};
use crate::model::{BoxError, DensityModel, Prediction};
use crate::numerics::{cholesky, lbfgs_minimize, CholeskyFactor, LbfgsConfig, Matrix, NumericsError};

/// Smallest learned noise variance (standardized units).
pub const NOISE_FLOOR: f64 = 1e-12;
const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("covariance not positive definite at pivot {pivot} even with jitter {jitter:e}")]
    NotPositiveDefinite { pivot: usize, jitter: f64 },
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
    #[error("hyperparameter optimization failed: every start was non-finite")]
    OptimizationFailed,
}

/// The paper-style `√6` rate or the textbook Matérn-3/2 `√3` rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    #[default]
    Sqrt6,
    Sqrt3,
}

impl KernelForm {
    pub fn from_sqrt3_variant(sqrt3: bool) -> Self {
        if sqrt3 {
            KernelForm::Sqrt3
        } else {
            KernelForm::Sqrt6
        }
    }

    pub fn rate(self) -> f64 {
        match self {
            KernelForm::Sqrt6 => 6f64.sqrt(),
            KernelForm::Sqrt3 => 3f64.sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub signal_sd: f64,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, signal_sd: f64, noise_variance: f64) -> Result<Self, GpError> {
        let p = Self { lengthscales, signal_sd, noise_variance };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), GpError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if self.lengthscales.is_empty() || !self.lengthscales.iter().all(|&l| pos(l)) {
            return Err(GpError::InvalidParams("lengthscales must be positive".into()));
        }
        if !pos(self.signal_sd) {
            return Err(GpError::InvalidParams("signal sd must be positive".into()));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(GpError::InvalidParams("noise variance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `[log l.., log σ, log(noise - floor)]`, the optimizer's coordinates.
    fn to_theta(&self, learn_noise: bool) -> Vec<f64> {
        let mut t: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        t.push(self.signal_sd.ln());
        if learn_noise {
            t.push((self.noise_variance - NOISE_FLOOR).max(NOISE_FLOOR).ln());
        }
        t
    }

    fn from_theta(theta: &[f64], d: usize, fixed_noise: Option<f64>) -> Self {
        Self {
            lengthscales: theta[..d].iter().map(|t| t.exp()).collect(),
            signal_sd: theta[d].exp(),
            noise_variance: fixed_noise.unwrap_or_else(|| NOISE_FLOOR + theta[d + 1].exp()),
        }
    }
}

fn scaled_distance(a: &[f64], b: &[f64], ls: &[f64]) -> f64 {
    a.iter().zip(b).zip(ls).map(|((x, y), l)| ((x - y) / l).powi(2)).sum::<f64>().sqrt()
}

/// `k = σ² (1 + a s) exp(-a s)`, `s = ‖r / l‖`, `a = √6` (or `√3`).
pub fn matern32(r: &[f64], params: &KernelParams, form: KernelForm) -> f64 {
    let s = r.iter().zip(&params.lengthscales).map(|(x, l)| (x / l).powi(2)).sum::<f64>().sqrt();
    let as_ = form.rate() * s;
    params.signal_sd.powi(2) * (1.0 + as_) * (-as_).exp()
}

fn kernel_at(s: f64, sigma2: f64, a: f64) -> f64 {
    sigma2 * (1.0 + a * s) * (-a * s).exp()
}

/// Noise-free covariance matrix of the rows of `x`.
pub fn covariance(x: &Matrix, params: &KernelParams, form: KernelForm) -> Matrix {
    let n = x.rows();
    let sigma2 = params.signal_sd.powi(2);
    let a = form.rate();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = sigma2;
        for j in 0..i {
            let v = kernel_at(scaled_distance(x.row(i), x.row(j), &params.lengthscales), sigma2, a);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Covariances between one query and every row of `x`.
pub fn cross_covariance(xq: &[f64], x: &Matrix, params: &KernelParams, form: KernelForm) -> Vec<f64> {
    let sigma2 = params.signal_sd.powi(2);
    let a = form.rate();
    (0..x.rows()).map(|i| kernel_at(scaled_distance(xq, x.row(i), &params.lengthscales), sigma2, a)).collect()
}

/// Factorizes `k`, adding diagonal jitter of 1e-8, 1e-7, ..., 1e-2 times the
/// mean diagonal if the plain factorization fails. Returns the factor and the
/// jitter that was added (0 if none).
pub fn factor_with_jitter(k: &Matrix) -> Result<(CholeskyFactor, f64), GpError> {
    let first_pivot = match cholesky(k) {
        Ok(f) => return Ok((f, 0.0)),
        Err(NumericsError::NotPositiveDefinite { pivot }) => pivot,
        Err(e) => return Err(e.into()),
    };
    let n = k.rows();
    let mean_diag = (0..n).map(|i| k[(i, i)]).sum::<f64>() / n as f64;
    let mut level = JITTER_START;
    let mut last = (first_pivot, 0.0);
    while level <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = level * mean_diag;
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        match cholesky(&kj) {
            Ok(f) => {
                log::debug!("covariance needed jitter {jitter:e}");
                return Ok((f, jitter));
            }
            Err(NumericsError::NotPositiveDefinite { pivot }) => last = (pivot, jitter),
            Err(e) => return Err(e.into()),
        }
        level *= 10.0;
    }
    Err(GpError::NotPositiveDefinite { pivot: last.0, jitter: last.1 })
}

fn noisy(k: &mut Matrix, noise: f64) {
    for i in 0..k.rows() {
        k[(i, i)] += noise;
    }
}

/// Log marginal likelihood and its gradient with respect to
/// `[log l_1, .., log l_d, log σ, log noise]`.
pub fn log_marginal_likelihood(x: &Matrix, y: &[f64], params: &KernelParams, form: KernelForm) -> Result<(f64, Vec<f64>), GpError> {
    let n = x.rows();
    let d = params.dim();
    if y.len() != n {
        return Err(GpError::DimensionMismatch { expected: n, found: y.len() });
    }
    if x.cols() != d {
        return Err(GpError::DimensionMismatch { expected: d, found: x.cols() });
    }
    if n == 0 {
        return Err(DatasetError::EmptyDataset.into());
    }
    let mut k = covariance(x, params, form);
    noisy(&mut k, params.noise_variance);
    let (chol, _) = factor_with_jitter(&k)?;
    let alpha = chol.solve(y)?;
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let value = -0.5 * fit - 0.5 * chol.log_det() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // dL/dθ = ½ Σ_ij (α_i α_j - K⁻¹_ij) ∂K_ij/∂θ
    let kinv = chol.inverse();
    let sigma2 = params.signal_sd.powi(2);
    let a = form.rate();
    let ls = &params.lengthscales;
    let mut g_l = vec![0.0; d];
    let mut g_sigma = 0.0;
    let mut trace = 0.0;
    for i in 0..n {
        let m_ii = alpha[i] * alpha[i] - kinv[(i, i)];
        g_sigma += m_ii * sigma2;
        trace += m_ii;
        let xi = x.row(i);
        for j in 0..i {
            let m_ij = 2.0 * (alpha[i] * alpha[j] - kinv[(i, j)]);
            let xj = x.row(j);
            let s = scaled_distance(xi, xj, ls);
            let e = (-a * s).exp();
            g_sigma += m_ij * sigma2 * (1.0 + a * s) * e;
            let c = m_ij * sigma2 * a * a * e;
            for q in 0..d {
                let r = (xi[q] - xj[q]) / ls[q];
                g_l[q] += c * r * r;
            }
        }
    }
    let mut grad: Vec<f64> = g_l.iter().map(|g| 0.5 * g).collect();
    // ∂K/∂log σ = 2K
    grad.push(g_sigma);
    grad.push(0.5 * trace * params.noise_variance);
    Ok((value, grad))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpConfig {
    pub sqrt3_variant: bool,
    /// Total optimizer starts, including the default initial point.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Fix the (standardized) noise variance instead of learning it.
    pub fixed_noise: Option<f64>,
    /// Ranges for random restarts, in standardized units.
    pub lengthscale_bounds: (f64, f64),
    pub signal_sd_bounds: (f64, f64),
    pub noise_bounds: (f64, f64),
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            sqrt3_variant: false,
            restarts: 10,
            seed: 0,
            max_iters: 500,
            fixed_noise: None,
            lengthscale_bounds: (0.05, 20.0),
            signal_sd_bounds: (0.1, 10.0),
            noise_bounds: (1e-8, 1e-1),
        }
    }
}

impl GpConfig {
    pub fn form(&self) -> KernelForm {
        KernelForm::from_sqrt3_variant(self.sqrt3_variant)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GpState {
    form: KernelForm,
    params: KernelParams,
    x_standardizer: Standardizer,
    y_mean: f64,
    y_sd: f64,
    x: Matrix,
    y: Vec<f64>,
    log_marginal_likelihood: f64,
}

/// A fitted GP. All internal quantities are in standardized units; the
/// public prediction methods take and return raw units.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "GpState", try_from = "GpState")]
pub struct GpModel {
    form: KernelForm,
    params: KernelParams,
    x_standardizer: Standardizer,
    y_mean: f64,
    y_sd: f64,
    x: Matrix,
    y: Vec<f64>,
    chol: CholeskyFactor,
    alpha: Vec<f64>,
    jitter: f64,
    lml: f64,
}

impl From<GpModel> for GpState {
    fn from(m: GpModel) -> Self {
        GpState {
            form: m.form,
            params: m.params,
            x_standardizer: m.x_standardizer,
            y_mean: m.y_mean,
            y_sd: m.y_sd,
            x: m.x,
            y: m.y,
            log_marginal_likelihood: m.lml,
        }
    }
}

impl TryFrom<GpState> for GpModel {
    type Error = GpError;
    fn try_from(s: GpState) -> Result<Self, GpError> {
        s.params.validate()?;
        if s.x.cols() != s.params.dim() || s.x_standardizer.dim() != s.params.dim() {
            return Err(GpError::DimensionMismatch { expected: s.params.dim(), found: s.x.cols() });
        }
        if s.x.rows() != s.y.len() {
            return Err(GpError::DimensionMismatch { expected: s.x.rows(), found: s.y.len() });
        }
        let mut m = GpModel::assemble(s.form, s.params, s.x_standardizer, s.y_mean, s.y_sd, s.x, s.y)?;
        m.lml = s.log_marginal_likelihood;
        Ok(m)
    }
}

fn target_scaling(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    // a constant target is legal; leave it unscaled
    let sd = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
    (mean, sd)
}

impl GpModel {
    fn assemble(
        form: KernelForm,
        params: KernelParams,
        x_standardizer: Standardizer,
        y_mean: f64,
        y_sd: f64,
        x: Matrix,
        y: Vec<f64>,
    ) -> Result<Self, GpError> {
        let mut k = covariance(&x, &params, form);
        noisy(&mut k, params.noise_variance);
        let (chol, jitter) = factor_with_jitter(&k)?;
        let alpha = chol.solve(&y)?;
        let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let lml = -0.5 * fit - 0.5 * chol.log_det() - 0.5 * y.len() as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(Self { form, params, x_standardizer, y_mean, y_sd, x, y, chol, alpha, jitter, lml })
    }

    /// Conditions on data with fixed hyperparameters (standardized units).
    pub fn with_params(x: &Matrix, y: &[f64], params: KernelParams, form: KernelForm) -> Result<Self, GpError> {
        let (xs, y_mean, y_sd) = Self::standardize(x, y)?;
        if params.dim() != x.cols() {
            return Err(GpError::DimensionMismatch { expected: x.cols(), found: params.dim() });
        }
        params.validate()?;
        let xm = xs.transform(x);
        let yv: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_sd).collect();
        Self::assemble(form, params, xs, y_mean, y_sd, xm, yv)
    }

    fn standardize(x: &Matrix, y: &[f64]) -> Result<(Standardizer, f64, f64), GpError> {
        if x.rows() != y.len() {
            return Err(GpError::DimensionMismatch { expected: x.rows(), found: y.len() });
        }
        if x.cols() == 0 {
            return Err(GpError::InvalidParams("no input columns".into()));
        }
        let names: Vec<String> = (0..x.cols()).map(|j| format!("x{j}")).collect();
        let xs = Standardizer::fit(x, &names)?;
        let (m, s) = target_scaling(y);
        Ok((xs, m, s))
    }

    /// Fits hyperparameters by maximizing the log marginal likelihood over
    /// `cfg.restarts` L-BFGS starts.
    pub fn fit(x: &Matrix, y: &[f64], cfg: &GpConfig) -> Result<Self, GpError> {
        let (xs, y_mean, y_sd) = Self::standardize(x, y)?;
        let form = cfg.form();
        let d = x.cols();
        let xm = xs.transform(x);
        let yv: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_sd).collect();
        let learn_noise = cfg.fixed_noise.is_none();

        let init = KernelParams { lengthscales: vec![1.0; d], signal_sd: 1.0, noise_variance: cfg.fixed_noise.unwrap_or(1e-4) };
        let theta0 = init.to_theta(learn_noise);
        let ln = |(a, b): (f64, f64)| (a.ln(), b.ln());
        let mut bounds = vec![ln(cfg.lengthscale_bounds); d];
        bounds.push(ln(cfg.signal_sd_bounds));
        if learn_noise {
            bounds.push(ln(cfg.noise_bounds));
        }

        let objective = |theta: &[f64]| {
            let p = KernelParams::from_theta(theta, d, cfg.fixed_noise);
            match log_marginal_likelihood(&xm, &yv, &p, form) {
                Ok((v, g)) => {
                    let mut grad: Vec<f64> = g[..=d].iter().map(|x| -x).collect();
                    if learn_noise {
                        // chain rule for noise = floor + exp(θ)
                        grad.push(-g[d + 1] * (p.noise_variance - NOISE_FLOOR) / p.noise_variance);
                    }
                    (-v, grad)
                }
                Err(_) => (f64::NAN, vec![f64::NAN; theta.len()]),
            }
        };
        let lcfg = LbfgsConfig { restarts: cfg.restarts.max(1), seed: cfg.seed, max_iters: cfg.max_iters, ..Default::default() };
        let best = lbfgs_minimize(objective, &theta0, Some(&bounds), &lcfg).map_err(|e| match e {
            NumericsError::NonFiniteObjective => GpError::OptimizationFailed,
            other => other.into(),
        })?;
        log::debug!(
            "gp fit: -lml {:.6} after {} iterations (start {}, {} failed, converged {})",
            best.value,
            best.iterations,
            best.start_index,
            best.failed_starts,
            best.converged
        );
        let params = KernelParams::from_theta(&best.x, d, cfg.fixed_noise);
        Self::assemble(form, params, xs, y_mean, y_sd, xm, yv)
    }

    pub fn input_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn form(&self) -> KernelForm {
        self.form
    }

    /// Hyperparameters in standardized units.
    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    /// Hyperparameters mapped back to raw input and target units.
    pub fn raw_params(&self) -> KernelParams {
        KernelParams {
            lengthscales: self.params.lengthscales.iter().zip(&self.x_standardizer.sds).map(|(l, s)| l * s).collect(),
            signal_sd: self.params.signal_sd * self.y_sd,
            noise_variance: self.params.noise_variance * self.y_sd * self.y_sd,
        }
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    /// Prior variance `σ² + noise` in raw target units.
    pub fn prior_variance(&self) -> f64 {
        (self.params.signal_sd.powi(2) + self.params.noise_variance) * self.y_sd * self.y_sd
    }

    /// Posterior mean and variance (including the noise term) at a raw query.
    pub fn predict(&self, xq: &[f64]) -> Result<Prediction, GpError> {
        self.posterior(xq, true)
    }

    /// Posterior of the latent function, without the noise term.
    pub fn predict_latent(&self, xq: &[f64]) -> Result<Prediction, GpError> {
        self.posterior(xq, false)
    }

    fn posterior(&self, xq: &[f64], with_noise: bool) -> Result<Prediction, GpError> {
        if xq.len() != self.input_dim() {
            return Err(GpError::DimensionMismatch { expected: self.input_dim(), found: xq.len() });
        }
        let z = self.x_standardizer.transform_row(xq);
        let ks = cross_covariance(&z, &self.x, &self.params, self.form);
        let mean: f64 = ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = self.chol.solve_lower(&ks)?;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let noise = if with_noise { self.params.noise_variance } else { 0.0 };
        let mut var = self.params.signal_sd.powi(2) - vv + noise;
        if var < 0.0 {
            if var < -1e-10 * self.params.signal_sd.powi(2) {
                log::warn!("negative posterior variance {var:e} clamped to 0");
            }
            var = 0.0;
        }
        Ok(Prediction::exact(mean * self.y_sd + self.y_mean, var * self.y_sd * self.y_sd))
    }

    /// Posterior mean only.
    pub fn predict_mean(&self, xq: &[f64]) -> Result<f64, GpError> {
        if xq.len() != self.input_dim() {
            return Err(GpError::DimensionMismatch { expected: self.input_dim(), found: xq.len() });
        }
        let z = self.x_standardizer.transform_row(xq);
        let ks = cross_covariance(&z, &self.x, &self.params, self.form);
        Ok(ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>() * self.y_sd + self.y_mean)
    }

    pub fn predict_batch(&self, xq: &Matrix) -> Result<Vec<Prediction>, GpError> {
        (0..xq.rows()).into_par_iter().map(|i| self.predict(xq.row(i))).collect()
    }
}

/// A GP over the features of density tables.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityGp {
    pub features: Vec<Feature>,
    pub gp: GpModel,
}

impl DensityGp {
    /// Fits on the features among `candidates` that vary in `train`.
    pub fn fit(train: &Dataset, candidates: &[Feature], cfg: &GpConfig) -> Result<Self, GpError> {
        let features = active_features(train, candidates)?;
        let x = train.design_matrix(&features);
        let gp = GpModel::fit(&x, &train.densities(), cfg)?;
        Ok(Self { features, gp })
    }

    pub fn inputs(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Vec<f64> {
        self.features.iter().map(|f| f.of_state(pressure, temperature, carbon_count)).collect()
    }

    pub fn predict(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Result<Prediction, GpError> {
        self.gp.predict(&self.inputs(pressure, temperature, carbon_count))
    }

    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<Prediction>, GpError> {
        self.gp.predict_batch(&d.design_matrix(&self.features))
    }
}

impl DensityModel for DensityGp {
    fn predict_state(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Result<Prediction, BoxError> {
        Ok(self.predict(pressure, temperature, carbon_count)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::{central_difference, max_relative_error};
    use crate::numerics::rng::{seeded, standard_normal};
    use rand::Rng;

    fn params(ls: &[f64], sigma: f64, noise: f64) -> KernelParams {
        KernelParams::new(ls.to_vec(), sigma, noise).unwrap()
    }

    #[test]
    fn kernel_values() {
        let p = params(&[1.0], 1.0, 0.0);
        assert_eq!(matern32(&[0.0], &p, KernelForm::Sqrt6), 1.0);
        let a = 6f64.sqrt();
        let expect = (1.0 + a) * (-a).exp();
        assert!((matern32(&[1.0], &p, KernelForm::Sqrt6) - expect).abs() < 1e-15);
        assert!((expect - 0.2978).abs() < 5e-5);
        let b = 3f64.sqrt();
        assert!((matern32(&[1.0], &p, KernelForm::Sqrt3) - (1.0 + b) * (-b).exp()).abs() < 1e-15);
        let q = params(&[2.0], 3.0, 0.0);
        assert_eq!(matern32(&[0.0], &q, KernelForm::Sqrt6), 9.0);
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let k = matern32(&[0.2 * i as f64], &q, KernelForm::Sqrt6);
            assert!(k < prev || i == 0);
            prev = k;
        }
        assert!(matern32(&[100.0], &q, KernelForm::Sqrt6) < 1e-50);
    }

    #[test]
    fn lml_scalar_case() {
        let x = Matrix::from_rows(&[vec![0.3]]);
        let sigma: f64 = 1.7;
        let y = 0.8;
        let (v, _) = log_marginal_likelihood(&x, &[y], &params(&[1.0], sigma, 0.0), KernelForm::Sqrt6).unwrap();
        let expect = -0.5 * (sigma * sigma).ln() - y * y / (2.0 * sigma * sigma) - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((v - expect).abs() < 1e-14);
    }

    fn random_problem(rng: &mut crate::numerics::SeededRng, n: usize, d: usize) -> (Matrix, Vec<f64>, KernelParams) {
        let x = Matrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
        let y = (0..n).map(|_| standard_normal(rng)).collect();
        let ls = (0..d).map(|_| rng.random_range(0.3..2.0)).collect();
        let p = KernelParams::new(ls, rng.random_range(0.5..2.0), rng.random_range(0.01..0.3)).unwrap();
        (x, y, p)
    }

    #[test]
    fn lml_gradient_matches_finite_differences() {
        let mut rng = seeded(5);
        for form in [KernelForm::Sqrt6, KernelForm::Sqrt3] {
            for _ in 0..5 {
                let (x, y, p) = random_problem(&mut rng, 20, 3);
                let (_, g) = log_marginal_likelihood(&x, &y, &p, form).unwrap();
                let mut theta: Vec<f64> = p.lengthscales.iter().map(|l| l.ln()).collect();
                theta.push(p.signal_sd.ln());
                theta.push(p.noise_variance.ln());
                let f = |t: &[f64]| {
                    let q = KernelParams { lengthscales: t[..3].iter().map(|v| v.exp()).collect(), signal_sd: t[3].exp(), noise_variance: t[4].exp() };
                    log_marginal_likelihood(&x, &y, &q, form).unwrap().0
                };
                let fd = central_difference(f, &theta, 1e-6);
                assert!(max_relative_error(&g, &fd, 1e-3) < 1e-5, "{g:?} vs {fd:?}");
            }
        }
    }

    #[test]
    fn duplicate_points_need_jitter() {
        let x = Matrix::from_rows(&[vec![0.0], vec![0.0], vec![1.0]]);
        let p = params(&[1.0], 1.0, 0.0);
        let k = covariance(&x, &p, KernelForm::Sqrt6);
        assert!(matches!(cholesky(&k), Err(NumericsError::NotPositiveDefinite { .. })));
        let (_, jitter) = factor_with_jitter(&k).unwrap();
        assert!(jitter > 0.0 && jitter <= 1e-2);
        assert!(log_marginal_likelihood(&x, &[1.0, 1.0, 0.0], &p, KernelForm::Sqrt6).is_ok());
    }

    #[test]
    fn jitter_gives_up_on_indefinite() {
        let k = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(factor_with_jitter(&k), Err(GpError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn two_points_interpolate() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        let y = [3.0, 5.0];
        let cfg = GpConfig { fixed_noise: Some(0.0), restarts: 3, ..Default::default() };
        let m = GpModel::fit(&x, &y, &cfg).unwrap();
        for (i, &t) in y.iter().enumerate() {
            let p = m.predict(x.row(i)).unwrap();
            assert!((p.mean - t).abs() < 1e-6 * t);
            assert!(p.variance <= 1e-8 * m.prior_variance());
        }
    }

    #[test]
    fn constant_inputs_are_rejected() {
        let x = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]);
        let err = GpModel::fit(&x, &[1.0, 2.0, 3.0], &GpConfig::default()).unwrap_err();
        assert!(matches!(err, GpError::Dataset(DatasetError::ZeroVariance { .. })));
    }

    #[test]
    fn far_query_reverts_to_prior() {
        let mut rng = seeded(2);
        let (x, y, p) = random_problem(&mut rng, 15, 2);
        let m = GpModel::with_params(&x, &y, p, KernelForm::Sqrt6).unwrap();
        let pred = m.predict(&[1e4, -1e4]).unwrap();
        let ymean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((pred.mean - ymean).abs() < 1e-9);
        assert!((pred.variance - m.prior_variance()).abs() < 1e-9 * m.prior_variance());
    }

    #[test]
    fn variance_bounded_and_monotone_in_data() {
        let mut rng = seeded(8);
        for _ in 0..10 {
            let n = 12;
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
            let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
            let p = params(&[1.0], 1.0, 1e-3);
            let q: Vec<f64> = (0..40).map(|i| -1.0 + 0.175 * i as f64).collect();
            let mut prev: Option<Vec<f64>> = None;
            for m in 3..=n {
                let x = Matrix::from_fn(m, 1, |i, _| xs[i]);
                // hold the standardization fixed so the variances are comparable
                let model = GpModel::assemble(
                    KernelForm::Sqrt6,
                    p.clone(),
                    Standardizer { names: vec!["x".into()], means: vec![0.0], sds: vec![1.0] },
                    0.0,
                    1.0,
                    x,
                    ys[..m].to_vec(),
                )
                .unwrap();
                let vars: Vec<f64> = q.iter().map(|&t| model.predict(&[t]).unwrap().variance).collect();
                for &v in &vars {
                    assert!(v <= model.prior_variance() + 1e-10);
                }
                if let Some(pv) = prev {
                    for (a, b) in vars.iter().zip(&pv) {
                        assert!(*a <= b + 1e-10, "{a} > {b}");
                    }
                }
                prev = Some(vars);
            }
        }
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = seeded(11);
        let (x, y, p) = random_problem(&mut rng, 25, 3);
        let m1 = GpModel::with_params(&x, &y, p.clone(), KernelForm::Sqrt6).unwrap();
        let perm: Vec<usize> = (0..25).rev().collect();
        let x2 = x.select_rows(&perm);
        let y2: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let m2 = GpModel::with_params(&x2, &y2, p, KernelForm::Sqrt6).unwrap();
        for _ in 0..20 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = m1.predict(&q).unwrap();
            let b = m2.predict(&q).unwrap();
            assert!((a.mean - b.mean).abs() < 1e-8 * a.mean.abs().max(1.0));
            assert!((a.variance - b.variance).abs() < 1e-8 * a.variance.max(1.0));
        }
    }

    #[test]
    fn serde_round_trip() {
        let mut rng = seeded(3);
        let (x, y, p) = random_problem(&mut rng, 10, 2);
        let m = GpModel::with_params(&x, &y, p, KernelForm::Sqrt3).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: GpModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back.form(), KernelForm::Sqrt3);
        let q = [0.3, -0.7];
        assert_eq!(m.predict(&q).unwrap(), back.predict(&q).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        let m = GpModel::with_params(&x, &[1.0, 2.0], params(&[1.0], 1.0, 0.0), KernelForm::Sqrt6).unwrap();
        assert!(matches!(m.predict(&[1.0, 2.0]), Err(GpError::DimensionMismatch { .. })));
    }
}
