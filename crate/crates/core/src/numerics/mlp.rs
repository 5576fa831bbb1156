//! Fully connected feed-forward networks with tanh hidden layers and a linear
//! output layer, with batched forward passes and reverse-mode gradients.
//!
//! All weights and biases live in one flat parameter vector so optimizers can
//! treat a network as a single `&mut [f64]`. Layer `i` occupies a
//! `(width[i+1] x width[i])` row-major weight block followed by its bias.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::gemm;
use super::rng::SeededRng;
use super::NumericsError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Uniform in ±sqrt(6 / (fan_in + fan_out)), zero biases.
    Xavier,
    /// Xavier for hidden layers, all-zero output layer: an untrained network
    /// outputs exactly zero.
    XavierZeroOutput,
    Zeros,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_batch`] for a later backward pass.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    batch: usize,
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network output of the last recorded forward pass (`batch x out`).
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], |v| v.as_slice())
    }
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    pub fn new(widths: &[usize], init: Init, rng: &mut SeededRng) -> Result<Self, NumericsError> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(NumericsError::InvalidArchitecture(format!("{widths:?}")));
        }
        let mut params = Vec::with_capacity(param_count(widths));
        let layers = widths.len() - 1;
        for (i, w) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let zero = match init {
                Init::Zeros => true,
                Init::XavierZeroOutput => i + 1 == layers,
                Init::Xavier => false,
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(if zero { 0.0 } else { rng.random_range(-limit..limit) });
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self { widths: widths.to_vec(), params })
    }

    pub fn from_params(widths: &[usize], params: Vec<f64>) -> Result<Self, NumericsError> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(NumericsError::InvalidArchitecture(format!("{widths:?}")));
        }
        let expected = param_count(widths);
        if params.len() != expected {
            return Err(NumericsError::DimensionMismatch { expected, found: params.len() });
        }
        Ok(Self { widths: widths.to_vec(), params })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_offset(&self, layer: usize) -> usize {
        param_count(&self.widths[..=layer])
    }

    /// Weight block (`out x in`, row-major) and bias of one layer.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let (fan_in, fan_out) = (self.widths[layer], self.widths[layer + 1]);
        let off = self.layer_offset(layer);
        let (w, rest) = self.params[off..].split_at(fan_in * fan_out);
        (w, &rest[..fan_out])
    }

    pub fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let (fan_in, fan_out) = (self.widths[layer], self.widths[layer + 1]);
        let off = self.layer_offset(layer);
        let (w, rest) = self.params[off..].split_at_mut(fan_in * fan_out);
        (w, &mut rest[..fan_out])
    }

    /// Forward pass for one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NumericsError> {
        let mut tape = Tape::new();
        self.forward_batch(x, 1, &mut tape)?;
        Ok(tape.output().to_vec())
    }

    /// Forward pass over `batch` row-major inputs, recording activations.
    pub fn forward_batch<'t>(&self, x: &[f64], batch: usize, tape: &'t mut Tape) -> Result<&'t [f64], NumericsError> {
        let expected = batch * self.input_width();
        if x.len() != expected {
            return Err(NumericsError::DimensionMismatch { expected, found: x.len() });
        }
        let layers = self.num_layers();
        tape.batch = batch;
        tape.acts.resize_with(layers + 1, Vec::new);
        tape.acts[0].clear();
        tape.acts[0].extend_from_slice(x);
        for i in 0..layers {
            let (fan_in, fan_out) = (self.widths[i], self.widths[i + 1]);
            let (w, b) = self.layer(i);
            let (prev, next) = tape.acts.split_at_mut(i + 1);
            let input = &prev[i];
            let out = &mut next[0];
            out.clear();
            for _ in 0..batch {
                out.extend_from_slice(b);
            }
            // out (batch x out) += input (batch x in) * Wᵀ
            gemm(batch, fan_in, fan_out, 1.0, input, (fan_in, 1), w, (1, fan_in), 1.0, out, (fan_out, 1));
            if i + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        Ok(tape.output())
    }

    /// Backward pass through the activations in `tape`.
    ///
    /// `grad_out` is dL/d(output) for every batch row. Parameter gradients are
    /// *accumulated* into `grad_params`; if `grad_input` is given it is
    /// overwritten with dL/d(input).
    pub fn backward(
        &self,
        tape: &mut Tape,
        grad_out: &[f64],
        grad_params: &mut [f64],
        grad_input: Option<&mut [f64]>,
    ) -> Result<(), NumericsError> {
        let batch = tape.batch;
        let layers = self.num_layers();
        if tape.acts.len() != layers + 1 {
            return Err(NumericsError::DimensionMismatch { expected: layers + 1, found: tape.acts.len() });
        }
        if grad_out.len() != batch * self.output_width() {
            return Err(NumericsError::DimensionMismatch {
                expected: batch * self.output_width(),
                found: grad_out.len(),
            });
        }
        if grad_params.len() != self.num_params() {
            return Err(NumericsError::DimensionMismatch { expected: self.num_params(), found: grad_params.len() });
        }
        if let Some(gi) = grad_input.as_ref() {
            if gi.len() != batch * self.input_width() {
                return Err(NumericsError::DimensionMismatch {
                    expected: batch * self.input_width(),
                    found: gi.len(),
                });
            }
        }
        let mut delta = std::mem::take(&mut tape.delta);
        let mut delta_prev = std::mem::take(&mut tape.delta_prev);
        delta.clear();
        delta.extend_from_slice(grad_out);
        let want_input = grad_input.is_some();

        for i in (0..layers).rev() {
            let (fan_in, fan_out) = (self.widths[i], self.widths[i + 1]);
            if i + 1 < layers {
                for (d, a) in delta.iter_mut().zip(&tape.acts[i + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let off = self.layer_offset(i);
            let (gw, gb) = grad_params[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            let a_prev = &tape.acts[i];
            // dW (out x in) += deltaᵀ (out x batch) * a_prev (batch x in)
            gemm(fan_out, batch, fan_in, 1.0, &delta, (1, fan_out), a_prev, (fan_in, 1), 1.0, gw, (fan_in, 1));
            for row in delta.chunks_exact(fan_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if i > 0 || want_input {
                let (w, _) = self.layer(i);
                delta_prev.clear();
                delta_prev.resize(batch * fan_in, 0.0);
                // delta_prev (batch x in) = delta (batch x out) * W (out x in)
                gemm(batch, fan_out, fan_in, 1.0, &delta, (fan_out, 1), w, (fan_in, 1), 0.0, &mut delta_prev, (fan_in, 1));
                std::mem::swap(&mut delta, &mut delta_prev);
            }
        }
        if let Some(gi) = grad_input {
            gi.copy_from_slice(&delta);
        }
        tape.delta = delta;
        tape.delta_prev = delta_prev;
        Ok(())
    }

    /// Value and parameter gradient of `loss(forward(x))` for a single input.
    ///
    /// `loss` maps the network output to `(value, dvalue/doutput)`.
    pub fn gradient<F>(&self, x: &[f64], loss: F) -> Result<(f64, Vec<f64>), NumericsError>
    where
        F: FnOnce(&[f64]) -> (f64, Vec<f64>),
    {
        let mut tape = Tape::new();
        let out = self.forward_batch(x, 1, &mut tape)?;
        let (value, g_out) = loss(out);
        let mut grad = vec![0.0; self.num_params()];
        self.backward(&mut tape, &g_out, &mut grad, None)?;
        Ok((value, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::seeded;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::new(&[3, 5, 5, 2], Init::Zeros, &mut seeded(0)).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_layer_is_affine() {
        let net = Mlp::from_params(&[2, 2], vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5]).unwrap();
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap(), vec![3.5, 6.5]);
    }

    #[test]
    fn hand_computed_two_two_one() {
        // hidden: h = tanh(W1 x + b1), out = w2·h + b2
        let params = vec![0.5, -1.0, 0.25, 0.75, 0.1, -0.2, 2.0, -3.0, 0.3];
        let net = Mlp::from_params(&[2, 2, 1], params).unwrap();
        let x = [0.4, 0.8];
        let h1 = (0.5 * 0.4 - 1.0 * 0.8 + 0.1f64).tanh();
        let h2 = (0.25 * 0.4 + 0.75 * 0.8 - 0.2f64).tanh();
        let expected = 2.0 * h1 - 3.0 * h2 + 0.3;
        assert!((net.forward(&x).unwrap()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_output_init() {
        let net = Mlp::new(&[2, 8, 1], Init::XavierZeroOutput, &mut seeded(1)).unwrap();
        assert_eq!(net.forward(&[0.3, 0.1]).unwrap(), vec![0.0]);
        assert!(net.layer(0).0.iter().any(|&w| w != 0.0));
    }

    #[test]
    fn linear_squared_loss_gradient_by_hand() {
        let net = Mlp::from_params(&[2, 1], vec![0.3, -0.7, 0.1]).unwrap();
        let x = [2.0, 1.0];
        let target = 1.0;
        let (_, g) = net
            .gradient(&x, |out| {
                let r = out[0] - target;
                (r * r, vec![2.0 * r])
            })
            .unwrap();
        let yhat = 0.3 * 2.0 - 0.7 + 0.1;
        let r = yhat - target;
        for (got, want) in g.iter().zip([2.0 * r * 2.0, 2.0 * r * 1.0, 2.0 * r]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_loss_gradient_gives_zero_parameter_gradient() {
        let net = Mlp::new(&[3, 4, 2], Init::Xavier, &mut seeded(2)).unwrap();
        let (_, g) = net.gradient(&[0.1, 0.2, 0.3], |_| (0.0, vec![0.0, 0.0])).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let net = Mlp::new(&[3, 4, 1], Init::Xavier, &mut seeded(3)).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        assert!(Mlp::from_params(&[2, 1], vec![0.0; 2]).is_err());
        assert!(Mlp::new(&[2], Init::Xavier, &mut seeded(0)).is_err());
    }

    #[test]
    fn batch_forward_matches_single() {
        let net = Mlp::new(&[2, 6, 6, 1], Init::Xavier, &mut seeded(4)).unwrap();
        let xs = [0.1, 0.2, -0.3, 0.4, 1.0, -1.0];
        let mut tape = Tape::new();
        let out = net.forward_batch(&xs, 3, &mut tape).unwrap().to_vec();
        for b in 0..3 {
            let single = net.forward(&xs[2 * b..2 * b + 2]).unwrap();
            assert!((single[0] - out[b]).abs() < 1e-14);
        }
    }
}
