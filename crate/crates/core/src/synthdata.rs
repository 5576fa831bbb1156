//! Analytic alkane-like density oracle.
//!
//! Density blends a compressed-liquid branch and a dilute gas branch through a
//! logistic switch in temperature:
//!
//! ```text
//! rho = gas(p, T) + (liquid(T, C) - gas(p, T)) * sigmoid((T0(p, C) - T) / w(p))
//! ```
//!
//! `T0` sits at the critical temperature of the alkane at the reference
//! pressure (2 MPa) and moves up with pressure; `w` widens with pressure, so
//! the drop is steep near the critical point and smooth at high pressure. The
//! functional forms are chosen so that density is strictly decreasing in `T`
//! and nondecreasing in `p` and `C` over the whole domain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DataPoint, Dataset, Fidelity};
use crate::numerics::rng::{seeded, standard_normal};

pub const PRESSURE_RANGE_MPA: (f64, f64) = (1.0, 200.0);
pub const TEMPERATURE_RANGE_K: (f64, f64) = (300.0, 950.0);
pub const CARBON_RANGE: (u32, u32) = (7, 16);

/// Pressures of the standard training grid, MPa.
pub const GRID_PRESSURES_MPA: [f64; 8] = [3.0, 4.0, 6.0, 8.0, 10.0, 20.0, 100.0, 150.0];
/// n-octane, n-nonane, n-decane, n-dodecane, n-hexadecane.
pub const GRID_CARBONS: [u32; 5] = [8, 9, 10, 12, 16];

/// 320, 340, ..., 900 K.
pub fn grid_temperatures() -> Vec<f64> {
    (0..30).map(|i| 320.0 + 20.0 * i as f64).collect()
}

/// Critical temperatures (K) of n-heptane through n-hexadecane.
const CRITICAL_TEMPERATURES: [f64; 10] = [540.2, 569.32, 594.55, 617.7, 639.0, 658.1, 675.0, 693.0, 708.0, 722.0];

pub fn critical_temperature(carbon_count: u32) -> Option<f64> {
    let (lo, hi) = CARBON_RANGE;
    (lo..=hi).contains(&carbon_count).then(|| CRITICAL_TEMPERATURES[(carbon_count - lo) as usize])
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("state (p={pressure} MPa, T={temperature} K, C={carbon_count}) is outside the oracle domain")]
    OutOfDomain { pressure: f64, temperature: f64, carbon_count: u32 },
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleParams {
    /// Liquid density at 300 K is `liquid_a - liquid_b / C`.
    pub liquid_a: f64,
    pub liquid_b: f64,
    /// Liquid thermal expansion slope, kg/m³ per K.
    pub thermal_slope: f64,
    /// Pressure at which the transition centre equals the critical temperature.
    pub reference_pressure: f64,
    /// Offset added to the critical temperature (nonzero for the
    /// high-fidelity variant).
    pub center_shift: f64,
    pub center_log_coeff: f64,
    pub center_pressure_scale: f64,
    /// Transition width at the reference pressure, K.
    pub width_ref: f64,
    pub width_log_coeff: f64,
    pub width_pressure_scale: f64,
    /// Multiplies every width (below 1 sharpens the transition).
    pub width_factor: f64,
    pub gas_scale: f64,
    pub gas_half_pressure: f64,
    pub gas_reference_temperature: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            liquid_a: 800.0,
            liquid_b: 400.0,
            thermal_slope: 0.6,
            reference_pressure: 2.0,
            center_shift: 0.0,
            center_log_coeff: 0.3,
            center_pressure_scale: 20.0,
            width_ref: 9.0,
            width_log_coeff: 0.5,
            width_pressure_scale: 10.0,
            width_factor: 1.0,
            gas_scale: 350.0,
            gas_half_pressure: 5.0,
            gas_reference_temperature: 600.0,
            noise_sd: 0.0,
            seed: 0,
        }
    }
}

/// How the high-fidelity oracle departs from the low-fidelity one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Discrepancy {
    /// Shift of the transition centre, K.
    pub center_shift: f64,
    /// Width multiplier, < 1 for a sharper transition.
    pub width_factor: f64,
}

impl Default for Discrepancy {
    fn default() -> Self {
        Self { center_shift: 8.0, width_factor: 0.75 }
    }
}

impl OracleParams {
    /// The high-fidelity variant: shifted, sharper transcritical transition.
    pub fn high_fidelity(&self, d: Discrepancy) -> Self {
        Self {
            center_shift: self.center_shift + d.center_shift,
            width_factor: self.width_factor * d.width_factor,
            noise_sd: 0.0,
            ..self.clone()
        }
    }

    fn width_shape(&self, p: f64) -> f64 {
        1.0 + self.width_log_coeff * (1.0 + p / self.width_pressure_scale).ln()
    }

    fn center_shape(&self, p: f64) -> f64 {
        self.width_shape(p) * (1.0 + self.center_log_coeff * (1.0 + p / self.center_pressure_scale).ln())
    }

    pub fn liquid(&self, t: f64, c: u32) -> f64 {
        self.liquid_a - self.liquid_b / f64::from(c) - self.thermal_slope * (t - 300.0)
    }

    pub fn gas(&self, p: f64, t: f64) -> f64 {
        self.gas_scale * p / (p + self.gas_half_pressure) * self.gas_reference_temperature / t
    }

    /// Transition centre `T0(p, C)`.
    pub fn center(&self, p: f64, c: u32) -> Option<f64> {
        let tc = critical_temperature(c)? + self.center_shift;
        let pr = self.reference_pressure;
        Some(300.0 + (tc - 300.0) * self.center_shape(p) / self.center_shape(pr))
    }

    /// Transition width `w(p)`.
    pub fn width(&self, p: f64) -> f64 {
        self.width_ref * self.width_factor * self.width_shape(p) / self.width_shape(self.reference_pressure)
    }
}

fn in_domain(p: f64, t: f64, c: u32) -> bool {
    (PRESSURE_RANGE_MPA.0..=PRESSURE_RANGE_MPA.1).contains(&p)
        && (TEMPERATURE_RANGE_K.0..=TEMPERATURE_RANGE_K.1).contains(&t)
        && (CARBON_RANGE.0..=CARBON_RANGE.1).contains(&c)
}

/// Noise-free oracle density in kg/m³.
pub fn oracle_density(p: f64, t: f64, c: u32, params: &OracleParams) -> Result<f64, SynthError> {
    if !in_domain(p, t, c) {
        return Err(SynthError::OutOfDomain { pressure: p, temperature: t, carbon_count: c });
    }
    let gas = params.gas(p, t);
    let liquid = params.liquid(t, c);
    let t0 = params.center(p, c).expect("carbon count checked");
    let s = 1.0 / (1.0 + ((t - t0) / params.width(p)).exp());
    Ok(gas + (liquid - gas) * s)
}

/// Full Cartesian table (carbon count outermost, temperature innermost),
/// tagged low fidelity, with optional Gaussian noise of sd `params.noise_sd`.
pub fn generate_table(pressures: &[f64], temperatures: &[f64], carbons: &[u32], params: &OracleParams) -> Result<Dataset, SynthError> {
    generate_table_tagged(pressures, temperatures, carbons, params, Fidelity::Low)
}

pub fn generate_table_tagged(
    pressures: &[f64],
    temperatures: &[f64],
    carbons: &[u32],
    params: &OracleParams,
    fidelity: Fidelity,
) -> Result<Dataset, SynthError> {
    let mut rng = seeded(params.seed);
    let mut points = Vec::with_capacity(pressures.len() * temperatures.len() * carbons.len());
    for &c in carbons {
        for &p in pressures {
            for &t in temperatures {
                let clean = oracle_density(p, t, c, params)?;
                let mut rho = clean;
                if params.noise_sd > 0.0 {
                    rho += params.noise_sd * standard_normal(&mut rng);
                    if rho <= 0.0 {
                        rho = clean;
                    }
                }
                points.push(DataPoint { pressure: p, temperature: t, carbon_count: c, density: rho, fidelity });
            }
        }
    }
    Ok(Dataset::new("oracle", points)?)
}

/// The standard 8 pressures x 30 temperatures x 5 fuels table.
pub fn reference_grid(params: &OracleParams) -> Result<Dataset, SynthError> {
    generate_table(&GRID_PRESSURES_MPA, &grid_temperatures(), &GRID_CARBONS, params)
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

/// Synthetic analog of repairing a transcritical curve by concatenating a few
/// trusted points into a low-fidelity training table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionSetup {
    pub carbon_count: u32,
    /// Pressure of the repaired curve, MPa.
    pub pressure: f64,
    /// Temperatures of the high-fidelity points, added in this order.
    pub anchors: Vec<f64>,
    /// Reference curve temperatures: `window.0..=window.1` by `window_step`.
    pub window: (f64, f64),
    pub window_step: f64,
    /// Also train on the low-fidelity curve at `pressure` (grid temperatures
    /// other than the anchors). Off: the curve is reached only by extrapolating
    /// from the grid pressures.
    pub low_curve: bool,
}

impl Default for FusionSetup {
    fn default() -> Self {
        Self {
            carbon_count: 12,
            pressure: 2.0,
            anchors: vec![660.0, 680.0, 700.0],
            window: (650.0, 710.0),
            window_step: 10.0,
            low_curve: false,
        }
    }
}

pub struct FusionData {
    pub base: Dataset,
    pub extra: Dataset,
    pub reference: Dataset,
}

impl FusionSetup {
    pub fn reference_temperatures(&self) -> Vec<f64> {
        steps(self.window.0, self.window.1, self.window_step)
    }

    /// Base: the low-fidelity grid table of one fuel, plus the curve at
    /// `pressure` if `low_curve`. Extra and reference come from the
    /// high-fidelity oracle.
    pub fn build(&self, low: &OracleParams, discrepancy: Discrepancy) -> Result<FusionData, SynthError> {
        let high = low.high_fidelity(discrepancy);
        let c = [self.carbon_count];
        let mut base = generate_table(&GRID_PRESSURES_MPA, &grid_temperatures(), &c, low)?;
        if self.low_curve {
            let curve: Vec<f64> = grid_temperatures().into_iter().filter(|t| !self.anchors.contains(t)).collect();
            // fuse tags the appended curve high fidelity; it is simulated data here
            base = base.fuse(&generate_table(&[self.pressure], &curve, &c, low)?)?;
        }
        let base = Dataset::new("fusion-base", base.iter().map(|p| DataPoint { fidelity: Fidelity::Low, ..*p }).collect())?;
        let extra = generate_table_tagged(&[self.pressure], &self.anchors, &c, &high, Fidelity::High)?;
        let reference = generate_table_tagged(&[self.pressure], &self.reference_temperatures(), &c, &high, Fidelity::High)?;
        Ok(FusionData { base, extra: extra.with_name("fusion-extra"), reference: reference.with_name("fusion-reference") })
    }
}

/// Synthetic analog of the paired low/high-fidelity study on one curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfSetup {
    pub carbon_count: u32,
    pub pressure: f64,
    /// Temperatures sampled at both fidelities.
    pub temperatures: Vec<f64>,
    /// Held-out curve `range.0..=range.1` by `step`, minus the training temperatures.
    pub range: (f64, f64),
    pub step: f64,
}

impl Default for MfSetup {
    fn default() -> Self {
        Self {
            carbon_count: 12,
            pressure: 2.0,
            temperatures: vec![320.0, 440.0, 500.0, 620.0, 660.0, 680.0, 700.0],
            range: (320.0, 700.0),
            step: 10.0,
        }
    }
}

pub struct MfData {
    pub low: Dataset,
    pub high: Dataset,
    pub truth: Dataset,
}

impl MfSetup {
    pub fn held_out_temperatures(&self) -> Vec<f64> {
        steps(self.range.0, self.range.1, self.step).into_iter().filter(|t| !self.temperatures.contains(t)).collect()
    }

    pub fn build(&self, low: &OracleParams, discrepancy: Discrepancy) -> Result<MfData, SynthError> {
        let high = low.high_fidelity(discrepancy);
        let c = [self.carbon_count];
        let p = [self.pressure];
        Ok(MfData {
            low: generate_table(&p, &self.temperatures, &c, low)?.with_name("mf-low"),
            high: generate_table_tagged(&p, &self.temperatures, &c, &high, Fidelity::High)?.with_name("mf-high"),
            truth: generate_table_tagged(&p, &self.held_out_temperatures(), &c, &high, Fidelity::High)?.with_name("mf-truth"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn reference_grid_has_1200_rows() {
        let d = reference_grid(&OracleParams::default()).unwrap();
        assert_eq!(d.len(), 1200);
        assert_eq!(grid_temperatures().len(), 30);
        assert_eq!(*grid_temperatures().last().unwrap(), 900.0);
        let dodecane = d.filter(|p| p.carbon_count == 12);
        assert_eq!(dodecane.len(), 240);
    }

    #[test]
    fn single_node() {
        let d = generate_table(&[3.0], &[320.0], &[12], &OracleParams::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.points()[0].fidelity, Fidelity::Low);
    }

    #[test]
    fn noise_free_tables_ignore_seed() {
        let a = OracleParams { seed: 1, ..Default::default() };
        let b = OracleParams { seed: 2, ..Default::default() };
        assert_eq!(reference_grid(&a).unwrap().points(), reference_grid(&b).unwrap().points());
    }

    #[test]
    fn noisy_tables_follow_seed() {
        let a = OracleParams { seed: 1, noise_sd: 2.0, ..Default::default() };
        let t1 = reference_grid(&a).unwrap();
        let t2 = reference_grid(&a).unwrap();
        assert_eq!(t1.points(), t2.points());
        let b = OracleParams { seed: 2, ..a.clone() };
        assert_ne!(t1.points(), reference_grid(&b).unwrap().points());
    }

    #[test]
    fn saturates_to_branches() {
        let prm = OracleParams::default();
        let t0 = prm.center(2.0, 12).unwrap();
        assert!((t0 - 658.1).abs() < 1e-9);
        let cold = oracle_density(2.0, 300.0, 12, &prm).unwrap();
        assert!((cold - prm.liquid(300.0, 12)).abs() / cold < 1e-6);
        let hot = oracle_density(2.0, 950.0, 12, &prm).unwrap();
        assert!((hot - prm.gas(2.0, 950.0)).abs() / hot < 1e-6);
    }

    #[test]
    fn out_of_domain() {
        let prm = OracleParams::default();
        for (p, t, c) in [(0.5, 400.0, 12), (3.0, 1000.0, 12), (3.0, 400.0, 20)] {
            assert!(matches!(oracle_density(p, t, c, &prm), Err(SynthError::OutOfDomain { .. })));
        }
    }

    #[test]
    fn liquid_densities_in_alkane_range() {
        let prm = OracleParams::default();
        for c in GRID_CARBONS {
            let rho = oracle_density(10.0, 320.0, c, &prm).unwrap();
            assert!((600.0..=800.0).contains(&rho), "C={c}: {rho}");
        }
    }

    fn random_state(rng: &mut crate::numerics::SeededRng) -> (f64, f64, u32) {
        let p = rng.random_range(1.0..200.0);
        let t = rng.random_range(300.0..949.0);
        let c = rng.random_range(7..=16);
        (p, t, c)
    }

    #[test]
    fn monotone_in_temperature_pressure_and_carbon() {
        let mut rng = seeded(17);
        for prm in [OracleParams::default(), OracleParams::default().high_fidelity(Discrepancy::default())] {
            for _ in 0..10_000 {
                let (p, t, c) = random_state(&mut rng);
                let h = 1e-3;
                let rho = oracle_density(p, t, c, &prm).unwrap();
                assert!(rho > 0.0);
                let dt = (oracle_density(p, t + h, c, &prm).unwrap() - oracle_density(p, t - h, c, &prm).unwrap()) / (2.0 * h);
                assert!(dt < 0.0, "d rho/dT = {dt} at {p} {t} {c}");
                let p2 = (p * 1.01).min(200.0);
                assert!(oracle_density(p2, t, c, &prm).unwrap() >= rho * (1.0 - 1e-12), "pressure at {p} {t} {c}");
                if c < 16 {
                    assert!(oracle_density(p, t, c + 1, &prm).unwrap() >= rho * (1.0 - 1e-12), "carbon at {p} {t} {c}");
                }
            }
        }
    }

    #[test]
    fn transition_sharper_at_low_pressure() {
        let prm = OracleParams::default();
        assert!(prm.width(3.0) < prm.width(100.0));
        let hi = prm.high_fidelity(Discrepancy::default());
        assert!(hi.width(2.0) < prm.width(2.0));
        assert!(hi.center(2.0, 12).unwrap() > prm.center(2.0, 12).unwrap());
    }

    #[test]
    fn fusion_setup_layout() {
        let f = FusionSetup::default().build(&OracleParams::default(), Discrepancy::default()).unwrap();
        assert_eq!(f.base.len(), 240);
        assert!(f.base.iter().all(|p| p.fidelity == Fidelity::Low && p.carbon_count == 12));
        assert_eq!(f.extra.len(), 3);
        assert_eq!(f.reference.len(), 7);
        assert_eq!(f.base.fuse(&f.extra).unwrap().len(), 243);

        let with_curve = FusionSetup { low_curve: true, ..Default::default() }.build(&OracleParams::default(), Discrepancy::default()).unwrap();
        assert_eq!(with_curve.base.len(), 240 + 27);
        assert!(with_curve.base.iter().all(|p| p.fidelity == Fidelity::Low));
        // extra never collides with the base
        assert_eq!(with_curve.base.fuse(&with_curve.extra).unwrap().len(), 270);
    }

    #[test]
    fn mf_setup_layout() {
        let m = MfSetup::default().build(&OracleParams::default(), Discrepancy::default()).unwrap();
        assert_eq!(m.low.len(), 7);
        assert_eq!(m.high.len(), 7);
        assert_eq!(m.truth.len(), 39 - 7);
        assert!(m.truth.iter().all(|p| !MfSetup::default().temperatures.contains(&p.temperature)));
    }
}
