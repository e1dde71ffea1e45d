//! Predator-prey ODE: fixed-step RK4 integration and noisy observation.
//!
//! dx1/dt = θ1·x1 − x1·x2 (prey), dx2/dt = θ2·x1·x2 − x2 (predator).
//! The system has equilibrium (1/θ2, θ1) and a conserved quantity
//! H = θ2·x1 − ln x1 + x2 − θ1·ln x2 along exact trajectories, which the
//! tests use as an integration oracle.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::series::PlanarSeries;

/// Blow-up guard: integration aborts once either component leaves [0, 1e6].
const STATE_CAP: f64 = 1.0e6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LvConfig {
    /// (θ1, θ2): prey growth rate and predation conversion rate.
    pub theta: [f64; 2],
    /// Initial state (prey, predator).
    pub x0: [f64; 2],
    /// Right end of the integration window [0, t_end].
    pub t_end: f64,
    /// Number of observation times i·t_end/n_points, i = 1..n_points.
    pub n_points: usize,
    /// RK4 step-size ceiling; actual steps divide each observation interval.
    pub step: f64,
    /// Measurement noise standard deviation per coordinate.
    pub noise_sd: [f64; 2],
}

impl Default for LvConfig {
    fn default() -> Self {
        LvConfig {
            theta: [1.0, 1.0],
            x0: [1.0, 0.5],
            t_end: 15.0,
            n_points: 500,
            step: 0.01,
            noise_sd: [0.5, 0.5],
        }
    }
}

impl LvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta[0] > 0.0 && self.theta[1] > 0.0) {
            return Err(Error::OutsideRegion {
                theta: self.theta.to_vec(),
                region: "positive orthant",
            });
        }
        if self.n_points == 0 {
            return Err(Error::InvalidConfig("n_points must be positive".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidConfig("t_end must be positive".into()));
        }
        // `step` is a ceiling: each observation interval is split into
        // ceil(interval/step) equal RK4 steps, so any positive value works.
        if !(self.step > 0.0) {
            return Err(Error::InvalidConfig("step must be positive".into()));
        }
        if self.noise_sd[0] < 0.0 || self.noise_sd[1] < 0.0 {
            return Err(Error::InvalidConfig("noise_sd must be nonnegative".into()));
        }
        Ok(())
    }
}

fn deriv(theta: [f64; 2], x: [f64; 2]) -> [f64; 2] {
    [
        theta[0] * x[0] - x[0] * x[1],
        theta[1] * x[0] * x[1] - x[1],
    ]
}

fn rk4_step(theta: [f64; 2], x: [f64; 2], h: f64) -> [f64; 2] {
    let k1 = deriv(theta, x);
    let k2 = deriv(theta, [x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
    let k3 = deriv(theta, [x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
    let k4 = deriv(theta, [x[0] + h * k3[0], x[1] + h * k3[1]]);
    [
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn guarded(x: [f64; 2], t: f64) -> Result<[f64; 2]> {
    let ok = x.iter().all(|v| v.is_finite() && (0.0..=STATE_CAP).contains(v));
    if ok {
        Ok(x)
    } else {
        Err(Error::NumericalBlowup { t })
    }
}

/// Noiseless state path at the n_points observation times. Deterministic.
pub fn integrate_lv(config: &LvConfig) -> Result<PlanarSeries> {
    config.validate()?;
    let interval = config.t_end / config.n_points as f64;
    // Sub-steps per observation interval; exact hits on every t_i.
    let m = (interval / config.step - 1e-9).ceil().max(1.0) as usize;
    let h = interval / m as f64;

    let mut x = guarded(config.x0, 0.0)?;
    let mut out = PlanarSeries {
        times: Vec::with_capacity(config.n_points),
        x1: Vec::with_capacity(config.n_points),
        x2: Vec::with_capacity(config.n_points),
    };
    for i in 1..=config.n_points {
        for j in 0..m {
            let t = ((i - 1) as f64 + j as f64 / m as f64) * interval;
            x = guarded(rk4_step(config.theta, x, h), t)?;
        }
        out.times.push(i as f64 * interval);
        out.x1.push(x[0]);
        out.x2.push(x[1]);
    }
    Ok(out)
}

/// Observation scheme for the predator-prey model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LvMode {
    /// Raw deterministic path; simulated pseudo-data carries no noise.
    Deterministic,
    /// Path plus fresh draws from the same measurement-noise law as the data.
    NoiseMatched,
}

/// Simulated observations of the path under the chosen scheme.
pub fn simulate_lv_observations(config: &LvConfig, mode: LvMode, seed: u64) -> Result<PlanarSeries> {
    let mut path = integrate_lv(config)?;
    if mode == LvMode::NoiseMatched {
        let [s1, s2] = config.noise_sd;
        for i in 0..path.len() {
            let mut rng = stream_rng(seed, i as u64);
            let n1: f64 = rng.sample(StandardNormal);
            let n2: f64 = rng.sample(StandardNormal);
            path.x1[i] += s1 * n1;
            path.x2[i] += s2 * n2;
        }
    }
    Ok(path)
}

/// Conserved quantity of the exact flow; oracle for integrator tests.
pub fn lv_invariant(theta: [f64; 2], x: [f64; 2]) -> f64 {
    theta[1] * x[0] - x[0].ln() + x[1] - theta[0] * x[1].ln()
}
