use serde::{Deserialize, Serialize};

/// Predictive mean and variance at one query, in output units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    /// Monte Carlo draws behind the moments, if sampled.
    pub samples: Option<usize>,
}

impl Prediction {
    pub fn exact(mean: f64, variance: f64) -> Self {
        Self { mean, variance, samples: None }
    }

    /// Sample mean and population variance (two-pass).
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let variance = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self { mean, variance, samples: Some(xs.len()) }
    }

    pub fn sd(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

/// Anything that predicts density at a thermodynamic state.
pub trait DensityModel: Sync {
    fn predict_state(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Result<Prediction, BoxError>;
}

impl<F> DensityModel for F
where
    F: Fn(f64, f64, u32) -> Prediction + Sync,
{
    fn predict_state(&self, pressure: f64, temperature: f64, carbon_count: u32) -> Result<Prediction, BoxError> {
        Ok(self(pressure, temperature, carbon_count))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_moments() {
        let p = Prediction::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.mean, 2.5);
        assert_eq!(p.variance, 1.25);
        assert_eq!(p.samples, Some(4));
        assert_eq!(Prediction::from_samples(&[7.0; 9]).variance, 0.0);
    }

    #[test]
    fn closures_are_models() {
        let m = |_p: f64, t: f64, _c: u32| Prediction::exact(t, 1.0);
        assert_eq!(m.predict_state(1.0, 400.0, 8).unwrap().mean, 400.0);
    }
}
