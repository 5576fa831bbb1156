//! Conditional generative regressor `y = f(x, z)`, `z ~ N(0, I)`, trained
//! adversarially with an encoder `q(z | x, y)` and a discriminator `T(x, y)`.
//!
//! Losses, for a batch of data `(x, y)` and latent draws `z`:
//!
//! * discriminator: `mean softplus(T(x, y)) + mean softplus(-T(x, f(x, z)))`
//!   (generated pairs are labeled 1, data pairs 0)
//! * generator: `mean T(x, f(x, z)) + λ mean ‖E(x, f(x, z)) - z‖²`
//! * encoder: `β mean ‖E(x, f(x, z)) - z‖²`, updated alongside the generator.
//!
//! At the discriminator's optimum `T` is the log density ratio, so the first
//! generator term is a reverse KL divergence; the reconstruction term keeps the
//! generator from collapsing its latent dimension.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{active_features, Dataset, DatasetError, Feature, Standardizer};
use crate::model::{BoxError, DensityModel, Prediction};
use crate::numerics::rng::{derive_seed, fill_standard_normal, seeded, SeededRng};
use crate::numerics::{AdamState, Init, Matrix, Mlp, NumericsError, Tape};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerativeError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("non-finite loss at step {step} (discriminator {disc_loss}, generator {gen_loss})")]
    NonFiniteLoss { step: usize, disc_loss: f64, gen_loss: f64 },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least {0} Monte Carlo samples")]
    TooFewSamples(usize),
}

/// Hidden-layer widths of the three networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub generator: Vec<usize>,
    pub encoder: Vec<usize>,
    pub discriminator: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { generator: vec![100; 4], encoder: vec![100; 4], discriminator: vec![100; 2] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Total optimizer updates, discriminator and generator combined.
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Updates per cycle: `disc_updates` discriminator steps then
    /// `gen_updates` generator steps.
    pub disc_updates: usize,
    pub gen_updates: usize,
    /// Weight of the latent reconstruction term in the generator loss.
    pub lambda: f64,
    /// Weight of the encoder's reconstruction loss.
    pub beta: f64,
    pub latent_dim: usize,
    pub seed: u64,
    /// Learning rate at the last step as a fraction of `learning_rate`,
    /// reached along a cosine curve. 1 keeps the rate constant.
    pub final_lr_fraction: f64,
    /// Decay of an exponential moving average of the generator weights; the
    /// average replaces the weights after training. 0 disables it.
    pub generator_ema: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 50_000,
            learning_rate: 1e-4,
            batch_size: 128,
            disc_updates: 2,
            gen_updates: 1,
            lambda: 1.5,
            beta: 0.5,
            latent_dim: 1,
            seed: 0,
            final_lr_fraction: 1.0,
            generator_ema: 0.0,
        }
    }
}

impl TrainConfig {
    /// Learning rate used at `step`.
    pub fn learning_rate_at(&self, step: usize) -> f64 {
        let f = self.final_lr_fraction;
        if f >= 1.0 || self.steps <= 1 {
            return self.learning_rate;
        }
        let t = step as f64 / (self.steps - 1) as f64;
        self.learning_rate * (f + (1.0 - f) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos()))
    }

    pub fn validate(&self) -> Result<(), GenerativeError> {
        let bad = |m: &str| Err(GenerativeError::InvalidConfig(m.to_string()));
        if self.disc_updates == 0 || self.gen_updates == 0 {
            return bad("update ratio terms must be positive");
        }
        if !(self.lambda >= 0.0) || !(self.beta >= 0.0) {
            return bad("lambda and beta must be non-negative");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return bad("final learning-rate fraction must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.generator_ema) {
            return bad("generator averaging decay must be in [0, 1)");
        }
        if self.batch_size == 0 || self.latent_dim == 0 {
            return bad("batch size and latent dimension must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Update {
    Discriminator,
    Generator,
}

/// Which network update `step` performs under a `disc:gen` cycle.
pub fn schedule(step: usize, disc_updates: usize, gen_updates: usize) -> Update {
    if step % (disc_updates + gen_updates) < disc_updates {
        Update::Discriminator
    } else {
        Update::Generator
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub disc_updates: usize,
    pub gen_updates: usize,
    pub final_disc_loss: f64,
    pub final_gen_loss: f64,
    pub final_reconstruction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerativeModel {
    latent_dim: usize,
    x_standardizer: Standardizer,
    y_mean: f64,
    y_sd: f64,
    generator: Mlp,
    encoder: Mlp,
    discriminator: Mlp,
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Row-major `[x_i, extra_i]` rows.
fn concat_rows(x: &[f64], d: usize, extra: &[f64], e: usize, out: &mut Vec<f64>) {
    out.clear();
    for (xr, er) in x.chunks_exact(d).zip(extra.chunks_exact(e)) {
        out.extend_from_slice(xr);
        out.extend_from_slice(er);
    }
}

/// Scratch buffers reused across training steps.
#[derive(Default)]
struct Work {
    idx: Vec<usize>,
    xb: Vec<f64>,
    yb: Vec<f64>,
    z: Vec<f64>,
    gin: Vec<f64>,
    din: Vec<f64>,
    ein: Vec<f64>,
    g_out: Vec<f64>,
    g_in: Vec<f64>,
    e_in: Vec<f64>,
    tg: Tape,
    td: Tape,
    te: Tape,
}

impl GenerativeModel {
    /// Untrained networks for `d` inputs. The generator and encoder start
    /// with a zero output layer.
    pub fn init(
        d: usize,
        arch: &Architecture,
        latent_dim: usize,
        x_standardizer: Standardizer,
        y_mean: f64,
        y_sd: f64,
        rng: &mut SeededRng,
    ) -> Result<Self, GenerativeError> {
        let generator = Mlp::new(&widths(d + latent_dim, &arch.generator, 1), Init::XavierZeroOutput, rng)?;
        let encoder = Mlp::new(&widths(d + 1, &arch.encoder, latent_dim), Init::XavierZeroOutput, rng)?;
        let discriminator = Mlp::new(&widths(d + 1, &arch.discriminator, 1), Init::Xavier, rng)?;
        Ok(Self { latent_dim, x_standardizer, y_mean, y_sd, generator, encoder, discriminator })
    }

    /// Assembles a model from given networks (used for tests and stubs).
    pub fn from_networks(
        generator: Mlp,
        encoder: Mlp,
        discriminator: Mlp,
        x_standardizer: Standardizer,
        y_mean: f64,
        y_sd: f64,
    ) -> Result<Self, GenerativeError> {
        let d = x_standardizer.dim();
        let latent_dim = generator.input_width().checked_sub(d).filter(|&k| k > 0).ok_or(GenerativeError::DimensionMismatch {
            expected: d + 1,
            found: generator.input_width(),
        })?;
        if generator.output_width() != 1 {
            return Err(GenerativeError::DimensionMismatch { expected: 1, found: generator.output_width() });
        }
        if encoder.input_width() != d + 1 || encoder.output_width() != latent_dim {
            return Err(GenerativeError::DimensionMismatch { expected: d + 1, found: encoder.input_width() });
        }
        if discriminator.input_width() != d + 1 || discriminator.output_width() != 1 {
            return Err(GenerativeError::DimensionMismatch { expected: d + 1, found: discriminator.input_width() });
        }
        Ok(Self { latent_dim, x_standardizer, y_mean, y_sd, generator, encoder, discriminator })
    }

    /// Trains on raw inputs `x` (n x d) and targets `y`.
    pub fn train(x: &Matrix, y: &[f64], arch: &Architecture, cfg: &TrainConfig) -> Result<(Self, TrainReport), GenerativeError> {
        cfg.validate()?;
        if x.rows() != y.len() {
            return Err(GenerativeError::DimensionMismatch { expected: x.rows(), found: y.len() });
        }
        if x.rows() == 0 {
            return Err(DatasetError::EmptyDataset.into());
        }
        let names: Vec<String> = (0..x.cols()).map(|j| format!("x{j}")).collect();
        let xs = Standardizer::fit(x, &names)?;
        let ys = Standardizer::fit_values(y, "y")?;
        let xm = xs.transform(x);
        let yv: Vec<f64> = y.iter().map(|&v| ys.transform_value(0, v)).collect();
        let mut rng = seeded(derive_seed(cfg.seed, 0x6e));
        let mut model = Self::init(x.cols(), arch, cfg.latent_dim, xs, ys.means[0], ys.sds[0], &mut rng)?;
        let report = model.fit_standardized(&xm, &yv, cfg, &mut rng)?;
        Ok((model, report))
    }

    fn fit_standardized(&mut self, x: &Matrix, y: &[f64], cfg: &TrainConfig, rng: &mut SeededRng) -> Result<TrainReport, GenerativeError> {
        let n = x.rows();
        let d = x.cols();
        let k = self.latent_dim;
        let b = cfg.batch_size.min(n);
        let mut opt_g = AdamState::new(self.generator.num_params(), cfg.learning_rate);
        let mut opt_e = AdamState::new(self.encoder.num_params(), cfg.learning_rate);
        let mut opt_d = AdamState::new(self.discriminator.num_params(), cfg.learning_rate);
        let mut grad_g = vec![0.0; self.generator.num_params()];
        let mut grad_e = vec![0.0; self.encoder.num_params()];
        let mut grad_d = vec![0.0; self.discriminator.num_params()];
        let mut w = Work { idx: (0..n).collect(), ..Default::default() };
        let mut report = TrainReport::default();

        let mut ema = (cfg.generator_ema > 0.0).then(|| self.generator.params().to_vec());

        for step in 0..cfg.steps {
            let lr = cfg.learning_rate_at(step);
            opt_g.learning_rate = lr;
            opt_e.learning_rate = lr;
            opt_d.learning_rate = lr;
            // mini-batch without replacement: partial Fisher-Yates
            if b < n {
                for i in 0..b {
                    let j = rng.random_range(i..n);
                    w.idx.swap(i, j);
                }
            }
            w.xb.clear();
            w.yb.clear();
            for &i in &w.idx[..b] {
                w.xb.extend_from_slice(x.row(i));
                w.yb.push(y[i]);
            }
            w.z.resize(b * k, 0.0);
            fill_standard_normal(rng, &mut w.z);
            concat_rows(&w.xb, d, &w.z, k, &mut w.gin);
            let fake = self.generator.forward_batch(&w.gin, b, &mut w.tg)?.to_vec();

            match schedule(step, cfg.disc_updates, cfg.gen_updates) {
                Update::Discriminator => {
                    // real rows first, then generated rows
                    concat_rows(&w.xb, d, &w.yb, 1, &mut w.din);
                    let mut fake_rows = Vec::with_capacity(b * (d + 1));
                    concat_rows(&w.xb, d, &fake, 1, &mut fake_rows);
                    w.din.extend_from_slice(&fake_rows);
                    let t = self.discriminator.forward_batch(&w.din, 2 * b, &mut w.td)?;
                    let inv = 1.0 / b as f64;
                    let mut loss = 0.0;
                    let mut g = vec![0.0; 2 * b];
                    for i in 0..b {
                        loss += softplus(t[i]) * inv;
                        g[i] = sigmoid(t[i]) * inv;
                        loss += softplus(-t[b + i]) * inv;
                        g[b + i] = -sigmoid(-t[b + i]) * inv;
                    }
                    if !loss.is_finite() {
                        return Err(GenerativeError::NonFiniteLoss { step, disc_loss: loss, gen_loss: report.final_gen_loss });
                    }
                    grad_d.iter_mut().for_each(|v| *v = 0.0);
                    self.discriminator.backward(&mut w.td, &g, &mut grad_d, None)?;
                    opt_d.step(self.discriminator.params_mut(), &grad_d)?;
                    report.disc_updates += 1;
                    report.final_disc_loss = loss;
                }
                Update::Generator => {
                    let inv = 1.0 / b as f64;
                    // adversarial term: d mean(T) / d fake
                    concat_rows(&w.xb, d, &fake, 1, &mut w.din);
                    let t = self.discriminator.forward_batch(&w.din, b, &mut w.td)?;
                    let adv: f64 = t.iter().sum::<f64>() * inv;
                    let g_t = vec![inv; b];
                    grad_d.iter_mut().for_each(|v| *v = 0.0);
                    w.g_in.resize(b * (d + 1), 0.0);
                    self.discriminator.backward(&mut w.td, &g_t, &mut grad_d, Some(&mut w.g_in))?;

                    // reconstruction term: mean ‖E(x, fake) - z‖²
                    concat_rows(&w.xb, d, &fake, 1, &mut w.ein);
                    let zhat = self.encoder.forward_batch(&w.ein, b, &mut w.te)?;
                    let mut rec = 0.0;
                    let mut g_z = vec![0.0; b * k];
                    for ((g, zh), z) in g_z.iter_mut().zip(zhat).zip(&w.z) {
                        let r = zh - z;
                        rec += r * r * inv;
                        *g = 2.0 * r * inv;
                    }
                    grad_e.iter_mut().for_each(|v| *v = 0.0);
                    w.e_in.resize(b * (d + 1), 0.0);
                    self.encoder.backward(&mut w.te, &g_z, &mut grad_e, Some(&mut w.e_in))?;

                    let loss = adv + cfg.lambda * rec;
                    if !loss.is_finite() {
                        return Err(GenerativeError::NonFiniteLoss { step, disc_loss: report.final_disc_loss, gen_loss: loss });
                    }
                    w.g_out.clear();
                    for i in 0..b {
                        w.g_out.push(w.g_in[i * (d + 1) + d] + cfg.lambda * w.e_in[i * (d + 1) + d]);
                    }
                    grad_g.iter_mut().for_each(|v| *v = 0.0);
                    self.generator.backward(&mut w.tg, &w.g_out, &mut grad_g, None)?;
                    opt_g.step(self.generator.params_mut(), &grad_g)?;
                    grad_e.iter_mut().for_each(|v| *v *= cfg.beta);
                    opt_e.step(self.encoder.params_mut(), &grad_e)?;
                    if let Some(avg) = ema.as_mut() {
                        let a = cfg.generator_ema;
                        for (m, &p) in avg.iter_mut().zip(self.generator.params()) {
                            *m = a * *m + (1.0 - a) * p;
                        }
                    }
                    report.gen_updates += 1;
                    report.final_gen_loss = loss;
                    report.final_reconstruction = rec;
                }
            }
        }
        if let Some(avg) = ema {
            self.generator.params_mut().copy_from_slice(&avg);
        }
        Ok(report)
    }

    pub fn input_dim(&self) -> usize {
        self.x_standardizer.dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn generator(&self) -> &Mlp {
        &self.generator
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn discriminator(&self) -> &Mlp {
        &self.discriminator
    }

    /// `n_samples` draws of `f(x*, z)` in raw output units.
    pub fn sample(&self, xq: &[f64], n_samples: usize, seed: u64) -> Result<Vec<f64>, GenerativeError> {
        if xq.len() != self.input_dim() {
            return Err(GenerativeError::DimensionMismatch { expected: self.input_dim(), found: xq.len() });
        }
        if n_samples == 0 {
            return Err(GenerativeError::TooFewSamples(1));
        }
        let k = self.latent_dim;
        let xs = self.x_standardizer.transform_row(xq);
        let mut rng = seeded(seed);
        let mut z = vec![0.0; n_samples * k];
        fill_standard_normal(&mut rng, &mut z);
        let mut input = Vec::with_capacity(n_samples * (xs.len() + k));
        for zr in z.chunks_exact(k) {
            input.extend_from_slice(&xs);
            input.extend_from_slice(zr);
        }
        let mut tape = Tape::new();
        let out = self.generator.forward_batch(&input, n_samples, &mut tape)?;
        Ok(out.iter().map(|v| v * self.y_sd + self.y_mean).collect())
    }

    /// Monte Carlo mean and population variance over `n_samples` draws.
    pub fn predict_moments(&self, xq: &[f64], n_samples: usize, seed: u64) -> Result<Prediction, GenerativeError> {
        if n_samples < 2 {
            return Err(GenerativeError::TooFewSamples(2));
        }
        Ok(Prediction::from_samples(&self.sample(xq, n_samples, seed)?))
    }
}

/// A generative model over the features of density tables, with the Monte
/// Carlo settings used for prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGenerative {
    pub features: Vec<Feature>,
    pub model: GenerativeModel,
    pub n_samples: usize,
    pub seed: u64,
}

pub const DEFAULT_MC_SAMPLES: usize = 2000;

impl DensityGenerative {
    pub fn train(train: &Dataset, candidates: &[Feature], arch: &Architecture, cfg: &TrainConfig) -> Result<(Self, TrainReport), GenerativeError> {
        let features = active_features(train, candidates)?;
        let x = train.design_matrix(&features);
        let (model, report) = GenerativeModel::train(&x, &train.densities(), arch, cfg)?;
        Ok((Self { features, model, n_samples: DEFAULT_MC_SAMPLES, seed: derive_seed(cfg.seed, 0x5a) }, report))
    }

    pub fn inputs(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Vec<f64> {
        self.features.iter().map(|f| f.of_state(pressure, temperature, carbon_count)).collect()
    }

    pub fn predict(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Result<Prediction, GenerativeError> {
        self.model.predict_moments(&self.inputs(pressure, temperature, carbon_count), self.n_samples, self.seed)
    }

    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<Prediction>, GenerativeError> {
        use rayon::prelude::*;
        d.points().par_iter().map(|p| self.predict(p.pressure, p.temperature, p.carbon_count)).collect()
    }
}

impl DensityModel for DensityGenerative {
    fn predict_state(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Result<Prediction, BoxError> {
        Ok(self.predict(pressure, temperature, carbon_count)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_standardizer(d: usize) -> Standardizer {
        Standardizer { names: (0..d).map(|j| format!("x{j}")).collect(), means: vec![0.0; d], sds: vec![1.0; d] }
    }

    fn stub(generator: Mlp) -> GenerativeModel {
        let mut rng = seeded(0);
        let d = generator.input_width() - 1;
        let enc = Mlp::new(&[d + 1, 1], Init::Zeros, &mut rng).unwrap();
        let disc = Mlp::new(&[d + 1, 1], Init::Zeros, &mut rng).unwrap();
        GenerativeModel::from_networks(generator, enc, disc, unit_standardizer(d), 0.0, 1.0).unwrap()
    }

    #[test]
    fn schedule_counts() {
        for (dd, gg) in [(2, 1), (1, 5), (3, 3)] {
            let cycles = 7;
            let total = cycles * (dd + gg);
            let disc = (0..total).filter(|&s| schedule(s, dd, gg) == Update::Discriminator).count();
            assert_eq!(disc, cycles * dd);
            assert_eq!(total - disc, cycles * gg);
        }
        assert_eq!(schedule(0, 2, 1), Update::Discriminator);
        assert_eq!(schedule(1, 2, 1), Update::Discriminator);
        assert_eq!(schedule(2, 2, 1), Update::Generator);
    }

    #[test]
    fn stable_softplus_and_sigmoid() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0).is_finite() && sigmoid(800.0) == 1.0);
    }

    #[test]
    fn constant_generator_has_zero_variance() {
        // generator f(x, z) = 3
        let g = Mlp::from_params(&[2, 1], vec![0.0, 0.0, 3.0]).unwrap();
        let m = stub(g);
        let p = m.predict_moments(&[0.4], 1000, 1).unwrap();
        assert_eq!(p.mean, 3.0);
        assert_eq!(p.variance, 0.0);
    }

    #[test]
    fn identity_generator_recovers_standard_normal() {
        // f(x, z) = z
        let g = Mlp::from_params(&[2, 1], vec![0.0, 1.0, 0.0]).unwrap();
        let m = stub(g);
        let p = m.predict_moments(&[0.0], 100_000, 9).unwrap();
        assert!(p.mean.abs() < 0.02);
        assert!((p.variance - 1.0).abs() < 0.02);
        assert_eq!(p.samples, Some(100_000));
    }

    #[test]
    fn sampling_is_seeded() {
        let g = Mlp::from_params(&[2, 1], vec![0.5, 1.0, 0.0]).unwrap();
        let m = stub(g);
        assert_eq!(m.sample(&[1.0], 50, 4).unwrap(), m.sample(&[1.0], 50, 4).unwrap());
        assert_ne!(m.sample(&[1.0], 50, 4).unwrap(), m.sample(&[1.0], 50, 5).unwrap());
        assert_eq!(m.sample(&[1.0], 1, 4).unwrap().len(), 1);
        assert!(m.sample(&[1.0, 2.0], 5, 4).is_err());
        assert!(m.predict_moments(&[1.0], 1, 4).is_err());
    }

    fn toy(n: usize) -> (Matrix, Vec<f64>) {
        let x = Matrix::from_fn(n, 1, |i, _| i as f64 / (n - 1) as f64);
        let y = (0..n).map(|i| (2.0 * std::f64::consts::PI * x[(i, 0)]).sin()).collect();
        (x, y)
    }

    #[test]
    fn zero_steps_is_untrained() {
        let (x, y) = toy(20);
        let cfg = TrainConfig { steps: 0, ..Default::default() };
        let arch = Architecture { generator: vec![8], encoder: vec![8], discriminator: vec![8] };
        let (m, r) = GenerativeModel::train(&x, &y, &arch, &cfg).unwrap();
        assert_eq!(r.disc_updates + r.gen_updates, 0);
        let p = m.predict_moments(&[0.3], 10, 0).unwrap();
        let ymean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((p.mean - ymean).abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic_and_counts_updates() {
        let (x, y) = toy(30);
        let cfg = TrainConfig { steps: 90, batch_size: 16, ..Default::default() };
        let arch = Architecture { generator: vec![10, 10], encoder: vec![10], discriminator: vec![10] };
        let (a, ra) = GenerativeModel::train(&x, &y, &arch, &cfg).unwrap();
        let (b, rb) = GenerativeModel::train(&x, &y, &arch, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(ra.disc_updates, 60);
        assert_eq!(ra.gen_updates, 30);
        let c = GenerativeModel::train(&x, &y, &arch, &TrainConfig { seed: 1, ..cfg }).unwrap().0;
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs() {
        let (x, y) = toy(10);
        let arch = Architecture::default();
        for cfg in [
            TrainConfig { disc_updates: 0, ..Default::default() },
            TrainConfig { lambda: -1.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
        ] {
            assert!(matches!(GenerativeModel::train(&x, &y, &arch, &cfg), Err(GenerativeError::InvalidConfig(_))));
        }
    }

    #[test]
    fn serde_round_trip() {
        let (x, y) = toy(10);
        let arch = Architecture { generator: vec![4], encoder: vec![4], discriminator: vec![4] };
        let (m, _) = GenerativeModel::train(&x, &y, &arch, &TrainConfig { steps: 6, ..Default::default() }).unwrap();
        let back: GenerativeModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, back);
    }
}
