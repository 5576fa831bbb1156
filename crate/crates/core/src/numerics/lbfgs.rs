//! Limited-memory BFGS with a strong-Wolfe line search and randomized restarts.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;

use super::matrix::dot;
use super::rng::{derive_seed, seeded, standard_normal};
use super::NumericsError;

#[derive(Clone, Debug)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Total number of starting points; the first one is always `x0`.
    pub restarts: usize,
    pub seed: u64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search_evals: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 500,
            grad_tol: 1e-8,
            restarts: 10,
            seed: 0,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evals: 40,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Index of the starting point that produced this minimum.
    pub start_index: usize,
    /// Starts aborted because the objective was not finite there.
    pub failed_starts: usize,
}

struct Eval {
    value: f64,
    grad: Vec<f64>,
}

struct Counter<'a, F> {
    f: &'a F,
    evals: usize,
}

impl<F: Fn(&[f64]) -> (f64, Vec<f64>)> Counter<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Eval {
        self.evals += 1;
        let (value, grad) = (self.f)(x);
        let value = if grad.iter().all(|g| g.is_finite()) { value } else { f64::NAN };
        Eval { value, grad }
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

/// Minimizes `f` (returning value and gradient) from `x0` plus
/// `cfg.restarts - 1` random starts, keeping the best result.
///
/// Random starts are drawn uniformly inside `restart_bounds` when given,
/// otherwise as `x0 + N(0, I)`. A start whose objective is not finite is
/// skipped; the call fails only if every start fails.
pub fn lbfgs_minimize<F>(
    f: F,
    x0: &[f64],
    restart_bounds: Option<&[(f64, f64)]>,
    cfg: &LbfgsConfig,
) -> Result<Minimum, NumericsError>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>) + Sync,
{
    if let Some(b) = restart_bounds {
        if b.len() != x0.len() {
            return Err(NumericsError::DimensionMismatch { expected: x0.len(), found: b.len() });
        }
    }
    let starts = cfg.restarts.max(1);
    let mut rng = seeded(derive_seed(cfg.seed, 0x1b_f6));
    let mut points = vec![x0.to_vec()];
    for _ in 1..starts {
        let p = match restart_bounds {
            Some(bounds) => bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect(),
            None => x0.iter().map(|v| v + standard_normal(&mut rng)).collect(),
        };
        points.push(p);
    }

    let results: Vec<Result<Minimum, NumericsError>> = points
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let mut m = minimize_from(&f, p, cfg)?;
            m.start_index = k;
            Ok(m)
        })
        .collect();

    let failed = results.iter().filter(|r| r.is_err()).count();
    let mut best: Option<Minimum> = None;
    for r in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    match best {
        Some(mut m) => {
            m.failed_starts = failed;
            Ok(m)
        }
        None => Err(NumericsError::NonFiniteObjective),
    }
}

/// One L-BFGS run without restarts.
pub fn minimize_from<F>(f: &F, x0: &[f64], cfg: &LbfgsConfig) -> Result<Minimum, NumericsError>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut obj = Counter { f, evals: 0 };
    let mut x = x0.to_vec();
    let Eval { value: mut fx, grad: mut g } = obj.eval(&x);
    if !fx.is_finite() {
        return Err(NumericsError::NonFiniteObjective);
    }
    if g.len() != x.len() {
        return Err(NumericsError::DimensionMismatch { expected: x.len(), found: g.len() });
    }
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        if norm(&g) < cfg.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut d = two_loop(&hist, &g);
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let alpha0 = if hist.is_empty() { (1.0 / norm(&g)).min(1.0) } else { 1.0 };

        let step = match strong_wolfe(&mut obj, &x, fx, slope, &d, alpha0, cfg) {
            Some(s) => s,
            None if !hist.is_empty() => {
                // stale curvature pairs; retry along steepest descent next time
                hist.clear();
                continue;
            }
            None => break,
        };
        let (alpha, next) = step;
        let x_new = axpy(&x, alpha, &d);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let decrease = fx - next.value;
        x = x_new;
        fx = next.value;
        g = next.grad;
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if hist.len() == cfg.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        if decrease.abs() <= f64::EPSILON * fx.abs().max(1e-300) && norm(&g) < cfg.grad_tol.sqrt() {
            break;
        }
    }
    let grad_norm = norm(&g);
    Ok(Minimum {
        x,
        value: fx,
        grad_norm,
        iterations,
        evaluations: obj.evals,
        converged: converged || grad_norm < cfg.grad_tol,
        start_index: 0,
        failed_starts: 0,
    })
}

fn two_loop(hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

struct Trial {
    alpha: f64,
    value: f64,
    slope: f64,
    grad: Vec<f64>,
}

fn cubic_min(a: &Trial, b: &Trial) -> Option<f64> {
    let d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    t.is_finite().then_some(t)
}

fn strong_wolfe<F>(
    obj: &mut Counter<'_, F>,
    x: &[f64],
    f0: f64,
    slope0: f64,
    d: &[f64],
    alpha0: f64,
    cfg: &LbfgsConfig,
) -> Option<(f64, Eval)>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let sufficient = |t: &Trial| t.value <= f0 + cfg.c1 * t.alpha * slope0;
    let curvature = |t: &Trial| t.slope.abs() <= -cfg.c2 * slope0;
    let probe = |obj: &mut Counter<'_, F>, alpha: f64| {
        let e = obj.eval(&axpy(x, alpha, d));
        Trial { alpha, value: e.value, slope: dot(&e.grad, d), grad: e.grad }
    };

    let mut prev = Trial { alpha: 0.0, value: f0, slope: slope0, grad: Vec::new() };
    let mut alpha = alpha0;
    let mut evals = 0;
    let (mut lo, mut hi) = loop {
        if evals >= cfg.max_line_search_evals {
            return None;
        }
        evals += 1;
        let t = probe(obj, alpha);
        if !t.value.is_finite() {
            alpha = prev.alpha + 0.5 * (alpha - prev.alpha);
            continue;
        }
        if !sufficient(&t) || (prev.alpha > 0.0 && t.value >= prev.value) {
            break (prev, t);
        }
        if curvature(&t) {
            return Some((t.alpha, Eval { value: t.value, grad: t.grad }));
        }
        if t.slope >= 0.0 {
            break (t, prev);
        }
        alpha = 2.0 * t.alpha;
        prev = t;
    };

    while evals < cfg.max_line_search_evals {
        evals += 1;
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        if width <= 1e-16 * b.max(1.0) {
            break;
        }
        let mut t_alpha = if hi.value.is_finite() { cubic_min(&lo, &hi).unwrap_or(f64::NAN) } else { f64::NAN };
        if !(t_alpha > a + 0.1 * width && t_alpha < b - 0.1 * width) {
            t_alpha = 0.5 * (a + b);
        }
        let t = probe(obj, t_alpha);
        if !t.value.is_finite() {
            hi = t;
            continue;
        }
        if !sufficient(&t) || t.value >= lo.value {
            hi = t;
        } else {
            if curvature(&t) {
                return Some((t.alpha, Eval { value: t.value, grad: t.grad }));
            }
            if t.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = t;
        }
    }
    // fall back to the best point with sufficient decrease, if any
    (lo.alpha > 0.0).then(|| (lo.alpha, Eval { value: lo.value, grad: lo.grad }))
}
