use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Bias-corrected Adam state for one flat parameter vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    /// Canonical defaults: β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(dim: usize, learning_rate: f64) -> Self {
        Self::with_betas(dim, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(dim: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self { learning_rate, beta1, beta2, epsilon, m: vec![0.0; dim], v: vec![0.0; dim], step: 0 }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<(), NumericsError> {
        if params.len() != self.dim() {
            return Err(NumericsError::DimensionMismatch { expected: self.dim(), found: params.len() });
        }
        if grad.len() != self.dim() {
            return Err(NumericsError::DimensionMismatch { expected: self.dim(), found: grad.len() });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let step_size = self.learning_rate / c1;
        let inv_c2 = 1.0 / c2;
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= step_size * *m / ((*v * inv_c2).sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut s = AdamState::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 3.5];
        for _ in 0..5 {
            s.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
        assert_eq!(s.steps_taken(), 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = AdamState::with_betas(1, 0.1, 0.9, 0.999, 1e-8);
        let mut w = vec![1.0];
        s.step(&mut w, &[2.0]).unwrap();
        // m̂ = 2, v̂ = 4 so the step is lr * 2 / (2 + ε)
        assert!((w[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn constant_gradient_shrinks_monotonically() {
        let mut s = AdamState::new(1, 0.1);
        let mut w = vec![1.0];
        let mut prev = w[0];
        for _ in 0..2 {
            s.step(&mut w, &[2.0]).unwrap();
            assert!(w[0] < prev);
            prev = w[0];
        }
        // with constant g the bias-corrected ratio stays 1, so each step is lr
        assert!((w[0] - 0.8).abs() < 1e-7);
    }

    #[test]
    fn dimension_mismatch() {
        let mut s = AdamState::new(2, 0.1);
        assert!(s.step(&mut [0.0, 0.0], &[1.0]).is_err());
        assert!(s.step(&mut [0.0], &[1.0, 1.0]).is_err());
    }
}
