use std::f64::consts::PI;

use propsurro::generative::{Architecture, GenerativeModel, TrainConfig};
use propsurro::metrics::l2_mre;
use propsurro::numerics::rng::{seeded, standard_normal};
use propsurro::numerics::Matrix;

fn arch() -> Architecture {
    Architecture { generator: vec![50; 3], encoder: vec![50; 3], discriminator: vec![50; 2] }
}

fn train_cfg(steps: usize) -> TrainConfig {
    TrainConfig { steps, learning_rate: 1e-3, final_lr_fraction: 0.01, seed: 4, ..Default::default() }
}

fn fit(xs: &[f64], ys: &[f64], steps: usize) -> GenerativeModel {
    let x = Matrix::from_fn(xs.len(), 1, |i, _| xs[i]);
    GenerativeModel::train(&x, ys, &arch(), &train_cfg(steps)).unwrap().0
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn sin_mean_is_recovered() {
    let xs = grid(100);
    let ys: Vec<f64> = xs.iter().map(|&x| (2.0 * PI * x).sin()).collect();
    let m = fit(&xs, &ys, 20_000);
    for i in 0..50 {
        let x = (i as f64 + 0.5) / 50.0;
        let mu = m.predict_moments(&[x], 2000, 1).unwrap().mean;
        assert!((mu - (2.0 * PI * x).sin()).abs() < 0.05, "x={x}: {mu}");
    }
}

#[test]
fn smooth_noise_free_toys_reach_small_l2_mre() {
    let toys: [(&str, fn(f64) -> f64); 2] = [("quadratic", |x| 1.0 + x * x), ("exponential", |x| (1.5 * x).exp())];
    for (name, f) in toys {
        let xs = grid(60);
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let m = fit(&xs, &ys, 20_000);
        let test: Vec<f64> = (0..40).map(|i| (i as f64 + 0.5) / 40.0).collect();
        let truth: Vec<f64> = test.iter().map(|&x| f(x)).collect();
        let pred: Vec<f64> = test.iter().map(|&x| m.predict_moments(&[x], 2000, 2).unwrap().mean).collect();
        let e = l2_mre(&truth, &pred).unwrap();
        assert!(e <= 1e-3, "{name}: {e:e}");
    }
}

#[test]
fn spread_tracks_heteroscedastic_noise() {
    let mut rng = seeded(8);
    let xs: Vec<f64> = (0..600).map(|i| i as f64 / 599.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| 2.0 * x + (0.02 + 0.4 * x) * standard_normal(&mut rng)).collect();
    let m = fit(&xs, &ys, 20_000);
    let probe = grid(40);
    let sds: Vec<f64> = probe.iter().map(|&x| m.predict_moments(&[x], 4000, 3).unwrap().sd()).collect();
    let rho = spearman(&probe, &sds);
    assert!(rho > 0.8, "rank correlation {rho}, sds {sds:?}");
}

#[test]
fn moments_converge_with_sample_count() {
    let xs = grid(100);
    let ys: Vec<f64> = xs.iter().map(|&x| (2.0 * PI * x).sin()).collect();
    let m = fit(&xs, &ys, 5_000);
    for &x in &[0.1, 0.45, 0.8] {
        let coarse = m.predict_moments(&[x], 10_000, 11).unwrap();
        let fine = m.predict_moments(&[x], 100_000, 12).unwrap();
        let bound = 3.0 * fine.sd() / (1e4f64).sqrt();
        assert!((coarse.mean - fine.mean).abs() < bound, "x={x}: {} vs {} (bound {bound})", coarse.mean, fine.mean);
    }
}
