//! Data-generating processes and their prior samplers.
//!
//! Four models: AR(1) with standard-normal innovations, MA(2) on its
//! feasibility region, i.i.d. Gaussian with unknown mean, and the
//! predator-prey ODE observed with additive noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lv::{simulate_lv_observations, LvConfig, LvMode};
use crate::rng::stream_rng;
use crate::series::{Series, SimOutput};

/// MA(2) feasibility: −2 < θ1 < 2, θ1 + θ2 > −1, θ1 − θ2 < 1.
///
/// This is the binding-function domain. It is unbounded above in θ2; the
/// sampling prior additionally clips θ2 < 1 (see [`ma2_in_triangle`]).
pub fn ma2_feasible(t1: f64, t2: f64) -> bool {
    t1 > -2.0 && t1 < 2.0 && t1 + t2 > -1.0 && t1 - t2 < 1.0
}

/// Invertibility triangle with vertices (−2,1), (2,1), (0,−1): the prior
/// support, equal to the feasibility region clipped to θ2 < 1.
pub fn ma2_in_triangle(t1: f64, t2: f64) -> bool {
    ma2_feasible(t1, t2) && t2 < 1.0
}

/// y_t = θ·y_{t−1} + ν_t with ν_t i.i.d. N(0,1); y_0 from the stationary law
/// N(0, 1/(1−θ²)), consumed but not included in the output.
pub fn simulate_ar1(theta: f64, length: usize, seed: u64) -> Result<Series> {
    if !(theta.abs() < 1.0) {
        return Err(Error::OutsideRegion {
            theta: vec![theta],
            region: "|theta| < 1",
        });
    }
    if length < 2 {
        return Err(Error::SeriesTooShort { need: 2, got: length });
    }
    let mut rng = stream_rng(seed, 0);
    let z0: f64 = rng.sample(StandardNormal);
    let mut y = z0 / (1.0 - theta * theta).sqrt();
    let mut out = Vec::with_capacity(length);
    for _ in 0..length {
        let nu: f64 = rng.sample(StandardNormal);
        y = theta * y + nu;
        out.push(y);
    }
    Ok(Series::new(out))
}

/// y_t = e_t + θ1·e_{t−1} + θ2·e_{t−2} with e_t i.i.d. N(0,1); two burn-in
/// innovations make every output value stationary.
pub fn simulate_ma2(theta: (f64, f64), length: usize, seed: u64) -> Result<Series> {
    let (t1, t2) = theta;
    if !ma2_feasible(t1, t2) {
        return Err(Error::OutsideRegion {
            theta: vec![t1, t2],
            region: "MA(2) feasibility region",
        });
    }
    if length < 3 {
        return Err(Error::SeriesTooShort { need: 3, got: length });
    }
    let mut rng = stream_rng(seed, 0);
    let mut e_prev2: f64 = rng.sample(StandardNormal);
    let mut e_prev1: f64 = rng.sample(StandardNormal);
    let mut out = Vec::with_capacity(length);
    for _ in 0..length {
        let e: f64 = rng.sample(StandardNormal);
        out.push(e + t1 * e_prev1 + t2 * e_prev2);
        e_prev2 = e_prev1;
        e_prev1 = e;
    }
    Ok(Series::new(out))
}

/// i.i.d. N(mean, 1) draws.
pub fn simulate_iid_normal(mean: f64, length: usize, seed: u64) -> Result<Series> {
    if length < 1 {
        return Err(Error::SeriesTooShort { need: 1, got: length });
    }
    let mut rng = stream_rng(seed, 0);
    let out = (0..length)
        .map(|_| mean + rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(Series::new(out))
}

/// A data-generating process together with everything needed to draw from
/// its prior and simulate pseudo-data at a parameter value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Ar1,
    Ma2,
    GaussMean,
    Lv {
        config: LvConfig,
        /// Scheme used for pseudo-data inside ABC (observed data is always noisy).
        mode: LvMode,
        /// Uniform prior box, one [lo, hi] pair per rate.
        prior_box: [[f64; 2]; 2],
    },
}

/// Default prior box for the predator-prey rates.
pub const LV_PRIOR_BOX: [[f64; 2]; 2] = [[0.0, 3.0], [0.0, 3.0]];

impl Model {
    pub fn lv_default() -> Self {
        Model::Lv {
            config: LvConfig::default(),
            mode: LvMode::NoiseMatched,
            prior_box: LV_PRIOR_BOX,
        }
    }

    /// Parameter dimension.
    pub fn dim(&self) -> usize {
        match self {
            Model::Ar1 | Model::GaussMean => 1,
            Model::Ma2 | Model::Lv { .. } => 2,
        }
    }

    /// Constraint-region membership for a parameter vector.
    pub fn in_support(&self, theta: &[f64]) -> bool {
        if theta.len() != self.dim() || theta.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Model::Ar1 => theta[0].abs() < 1.0 && theta[0] != 0.0,
            Model::Ma2 => ma2_feasible(theta[0], theta[1]),
            Model::GaussMean => true,
            Model::Lv { .. } => theta[0] > 0.0 && theta[1] > 0.0,
        }
    }

    /// Simulate a series of `length` observations at `theta`.
    ///
    /// For the ODE model `length` is the number of observation times and the
    /// stored config supplies the rest; pseudo-data follows the stored mode.
    pub fn simulate(&self, theta: &[f64], length: usize, seed: u64) -> Result<SimOutput> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        match self {
            Model::Ar1 => Ok(SimOutput::Scalar(simulate_ar1(theta[0], length, seed)?)),
            Model::Ma2 => Ok(SimOutput::Scalar(simulate_ma2(
                (theta[0], theta[1]),
                length,
                seed,
            )?)),
            Model::GaussMean => Ok(SimOutput::Scalar(simulate_iid_normal(
                theta[0], length, seed,
            )?)),
            Model::Lv { config, mode, .. } => {
                let config = LvConfig {
                    theta: [theta[0], theta[1]],
                    n_points: length,
                    ..config.clone()
                };
                Ok(SimOutput::Planar(simulate_lv_observations(
                    &config, *mode, seed,
                )?))
            }
        }
    }

    /// One prior draw from stream `index` under `seed`. Pure in (seed, index).
    pub fn prior_draw(&self, seed: u64, index: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, index);
        match self {
            Model::Ar1 => vec![rng.random_range(-1.0..1.0)],
            Model::Ma2 => loop {
                let t1 = rng.random_range(-2.0..2.0);
                let t2 = rng.random_range(-1.0..1.0);
                if ma2_in_triangle(t1, t2) {
                    return vec![t1, t2];
                }
            },
            Model::GaussMean => vec![rng.sample(StandardNormal)],
            Model::Lv { prior_box, .. } => prior_box
                .iter()
                .map(|&[lo, hi]| rng.random_range(lo..hi))
                .collect(),
        }
    }

    /// Rejection attempts stream `index` makes before producing a draw.
    /// 1 for every model whose prior needs no rejection step.
    pub fn prior_attempts(&self, seed: u64, index: u64) -> u64 {
        match self {
            Model::Ma2 => {
                let mut rng = stream_rng(seed, index);
                let mut n = 0;
                loop {
                    n += 1;
                    let t1 = rng.random_range(-2.0..2.0);
                    let t2 = rng.random_range(-1.0..1.0);
                    if ma2_in_triangle(t1, t2) {
                        return n;
                    }
                }
            }
            _ => 1,
        }
    }
}

/// i.i.d. prior draws over the model's constraint region.
pub fn sample_prior(model: &Model, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count).map(|i| model.prior_draw(seed, i as u64)).collect()
}
