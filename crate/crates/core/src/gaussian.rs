//! Closed-form machinery for the Gaussian location model: the conjugate
//! pseudo-posterior under kernel smoothing, the printed Erf tail formula,
//! an exact CDF route computed independently, and numeric sweeps of the
//! two sequential limits (sample size and tolerance).
//!
//! The printed tail formula and the CDF route genuinely disagree away from
//! the limit (the printed constants give a small-delta limit of sqrt(2)/2
//! rather than 1). Both are kept, verbatim and side by side, and never
//! reconciled into one; the limit conclusion they share is what the sweeps
//! check.

use crate::error::{Error, Result};
use crate::rng::{child_seed, stream_rng};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

const FRAC_SQRT_2_4: f64 = std::f64::consts::SQRT_2 / 4.0;
const TWO_OVER_SQRT_PI: f64 = 1.1283791670955126;

/// Error function via its Maclaurin series on |x| <= 2 and a continued
/// fraction for the complement beyond, accurate to about 1e-13 everywhere.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x <= 2.0 {
        erf_series(x)
    } else {
        1.0 - erfc_cf(x)
    }
}

/// Complement 1 - erf(x), computed directly in the far tail so tiny values
/// keep relative accuracy.
pub fn erfc(x: f64) -> f64 {
    if x > 2.0 {
        erfc_cf(x)
    } else if x < -2.0 {
        2.0 - erfc_cf(-x)
    } else {
        1.0 - erf_series(x)
    }
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = (2/sqrt(pi)) sum (-1)^n x^(2n+1) / (n! (2n+1)); on |x| <= 2
    // the largest term is ~2.4, so cancellation stays near machine epsilon.
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    loop {
        n += 1;
        term *= -x2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() <= 1e-17 * sum.abs().max(1e-300) || n > 200 {
            break;
        }
    }
    TWO_OVER_SQRT_PI * sum
}

/// Modified Lentz evaluation of sqrt(pi) e^{x^2} erfc(x) =
/// 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), valid for x > 0.
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x.max(TINY);
    let mut c = f;
    let mut d = 0.0;
    for k in 1..=300 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (std::f64::consts::PI.sqrt() * f)
}

/// Conjugate pseudo-posterior for the unit-variance Gaussian location model
/// observed through a sample mean and smoothed with bandwidth epsilon.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PseudoPosterior {
    pub eta_y: f64,
    pub t: usize,
    pub epsilon: f64,
    /// Posterior mean eta(y) / ((1/T) + eps^2 + 1).
    pub mean: f64,
    /// Posterior variance (1 + T eps^2) / (T + 1 + T eps^2).
    pub variance: f64,
}

pub fn pseudo_posterior_params(eta_y: f64, t: usize, epsilon: f64) -> Result<PseudoPosterior> {
    if t < 1 {
        return Err(Error::InvalidConfig("sample size must be at least 1".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidConfig(format!("bandwidth {epsilon} must be >= 0")));
    }
    let tf = t as f64;
    let e2 = epsilon * epsilon;
    Ok(PseudoPosterior {
        eta_y,
        t,
        epsilon,
        mean: eta_y / ((1.0 / tf) + e2 + 1.0),
        variance: (1.0 + tf * e2) / (tf + 1.0 + tf * e2),
    })
}

/// Inputs of the posterior tail-mass question Pr(|theta - theta0| >= delta).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailQuery {
    pub theta0: f64,
    pub delta: f64,
    pub eta_y: f64,
    pub t: usize,
    pub epsilon: f64,
}

impl TailQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidConfig(format!("delta {} must be > 0", self.delta)));
        }
        if self.t < 1 {
            return Err(Error::InvalidConfig("sample size must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bandwidth {} must be >= 0",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// The two Erf arguments of the printed tail formula, verbatim:
/// sqrt((T eps^2 + T + 1)/(T eps^2 + 1)) times
/// (delta -+ theta0 +- eta(y)/(eps^2 + 1/T + 1)).
pub fn x_terms(query: &TailQuery) -> Result<(f64, f64)> {
    query.validate()?;
    let tf = query.t as f64;
    let e2 = query.epsilon * query.epsilon;
    let factor = ((tf * e2 + tf + 1.0) / (tf * e2 + 1.0)).sqrt();
    let shift = query.eta_y / (e2 + 1.0 / tf + 1.0);
    let x1 = factor * (query.delta - query.theta0 + shift);
    let x2 = factor * (query.delta + query.theta0 - shift);
    Ok((x1, x2))
}

/// The printed zero-bandwidth reduction of the x-terms:
/// sqrt(T+1) (delta -+ theta0 +- eta(y)/(1/T + 1)).
pub fn x_terms_at_zero_bandwidth(
    theta0: f64,
    delta: f64,
    eta_y: f64,
    t: usize,
) -> Result<(f64, f64)> {
    if t < 1 {
        return Err(Error::InvalidConfig("sample size must be at least 1".into()));
    }
    let tf = t as f64;
    let factor = (tf + 1.0).sqrt();
    let shift = eta_y / (1.0 / tf + 1.0);
    Ok((
        factor * (delta - theta0 + shift),
        factor * (delta + theta0 - shift),
    ))
}

/// The tail mass exactly as printed:
/// -(sqrt2/4)(Erf(x1) - 1) - (sqrt2/4)(Erf(x2) - 1).
/// Its range is [0, sqrt2/2]; it is not a normalized probability away from
/// the limit. Compare with `tail_prob_cdf_oracle`, never merge them.
pub fn tail_prob_paper(query: &TailQuery) -> Result<f64> {
    let (x1, x2) = x_terms(query)?;
    Ok(-FRAC_SQRT_2_4 * (erf(x1) - 1.0) - FRAC_SQRT_2_4 * (erf(x2) - 1.0))
}

/// Independent route: the same tail mass integrated exactly under the
/// pseudo-posterior normal via the standard CDF.
pub fn tail_prob_cdf_oracle(query: &TailQuery) -> Result<f64> {
    query.validate()?;
    let p = pseudo_posterior_params(query.eta_y, query.t, query.epsilon)?;
    let s = p.variance.sqrt();
    let lower = (query.theta0 - query.delta - p.mean) / s;
    let upper = (query.theta0 + query.delta - p.mean) / s;
    Ok(phi(lower) + (1.0 - phi(upper)))
}

/// Nesting order for the two-parameter limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitOrder {
    /// Bandwidth goes to its limit inside each sample size.
    EpsThenT,
    /// Sample size goes to its limit inside each bandwidth.
    TThenEps,
}

/// How the observed sample mean is produced per sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    /// theta0 + z/sqrt(T), one standard normal z per size (seeded): the
    /// stochastic statement "the sample mean converges to the truth".
    Simulated,
    /// eta(y) = theta0 exactly, for reproducing the printed limit algebra.
    AtTruth,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepCell {
    pub t: usize,
    pub epsilon: f64,
    pub eta_y: f64,
    pub x1: f64,
    pub x2: f64,
    pub prob_paper: f64,
    pub prob_oracle: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitSweepTable {
    pub order: LimitOrder,
    pub theta0: f64,
    pub delta: f64,
    pub eta_mode: EtaMode,
    pub seed: u64,
    /// Rows in nesting order; the last row is the grid corner.
    pub cells: Vec<SweepCell>,
}

impl LimitSweepTable {
    /// The extreme cell (largest T, smallest bandwidth).
    pub fn corner(&self) -> &SweepCell {
        self.cells.last().expect("table is never empty")
    }

    pub fn to_csv(&self) -> String {
        let order = match self.order {
            LimitOrder::EpsThenT => "eps_then_t",
            LimitOrder::TThenEps => "t_then_eps",
        };
        let mut out = String::from("order,T,epsilon,x1,x2,prob_paper,prob_oracle\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{order},{},{},{},{},{},{}",
                c.t, c.epsilon, c.x1, c.x2, c.prob_paper, c.prob_oracle
            );
        }
        out
    }
}

/// Evaluate both tail routes over the T and bandwidth grids in the given
/// nesting order. The observed mean is drawn once per sample size, shared
/// by every bandwidth at that size. The caller asserts what the corner
/// should be; this function only reports it.
pub fn sequential_limit_sweep(
    order: LimitOrder,
    theta0: f64,
    delta: f64,
    t_grid: &[usize],
    eps_grid: &[f64],
    eta_mode: EtaMode,
    seed: u64,
) -> Result<LimitSweepTable> {
    if t_grid.is_empty() || eps_grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grids must be nonempty".into()));
    }
    if t_grid.iter().any(|&t| t < 1) || t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "sample-size grid must be ascending toward the limit".into(),
        ));
    }
    if eps_grid.iter().any(|&e| !(e >= 0.0)) || eps_grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidConfig(
            "bandwidth grid must descend toward the limit".into(),
        ));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig(format!("delta {delta} must be > 0")));
    }
    let eta_stream = child_seed(seed, "eta");
    let eta_at = |t: usize| -> f64 {
        match eta_mode {
            EtaMode::AtTruth => theta0,
            EtaMode::Simulated => {
                let z: f64 = StandardNormal.sample(&mut stream_rng(eta_stream, t as u64));
                theta0 + z / (t as f64).sqrt()
            }
        }
    };
    let pairs: Vec<(usize, f64)> = match order {
        LimitOrder::EpsThenT => t_grid
            .iter()
            .flat_map(|&t| eps_grid.iter().map(move |&e| (t, e)))
            .collect(),
        LimitOrder::TThenEps => eps_grid
            .iter()
            .flat_map(|&e| t_grid.iter().map(move |&t| (t, e)))
            .collect(),
    };
    let cells: Vec<SweepCell> = pairs
        .par_iter()
        .map(|&(t, epsilon)| {
            let query = TailQuery { theta0, delta, eta_y: eta_at(t), t, epsilon };
            let (x1, x2) = x_terms(&query)?;
            Ok(SweepCell {
                t,
                epsilon,
                eta_y: query.eta_y,
                x1,
                x2,
                prob_paper: tail_prob_paper(&query)?,
                prob_oracle: tail_prob_cdf_oracle(&query)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LimitSweepTable { order, theta0, delta, eta_mode, seed, cells })
}
