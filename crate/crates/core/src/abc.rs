//! Accept/reject ABC: simulate parameter draws from the prior, match
//! simulated summaries (or auxiliary scores, or raw paths) against the
//! observed data, keep the draws that land within tolerance.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{
    cholesky, component_stds, covariance, diag_weighted, euclidean, lv_raw_path_distance,
    mahalanobis, score_norm, Matrix,
};
use crate::error::{Error, Result};
use crate::kde::{kde_1d, KdeEstimate, DEFAULT_GRID_POINTS};
use crate::model::Model;
use crate::rng::{child_seed, compose, stream_rng};
use crate::series::SimOutput;
use crate::summaries::{evaluate_statistic_set, ols_ar2_criterion_gradient, ols_ar2_estimate, StatisticSet};

/// How the acceptance radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum ToleranceRule {
    /// Fixed radius; may be +∞ (accept everything that simulates).
    Absolute(f64),
    /// Keep exactly ⌈qN⌉ draws: the q-quantile of all N distances.
    Quantile(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbcConfig {
    pub n_draws: usize,
    pub tolerance: ToleranceRule,
    pub seed: u64,
    /// Simulated series length; must match the observed series.
    pub series_length: usize,
}

impl AbcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::InvalidConfig("n_draws must be at least 1".into()));
        }
        match self.tolerance {
            ToleranceRule::Absolute(e) if e >= 0.0 => {}
            ToleranceRule::Absolute(e) => {
                return Err(Error::InvalidConfig(format!("absolute tolerance {e} < 0")));
            }
            ToleranceRule::Quantile(q) if q > 0.0 && q < 1.0 => {}
            ToleranceRule::Quantile(q) => {
                return Err(Error::InvalidConfig(format!(
                    "quantile {q} outside (0,1)"
                )));
            }
        }
        Ok(())
    }
}

/// Distance kinds available for statistic matching. The weighted kinds are
/// resolved from the simulated batch at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatDistance {
    Euclidean,
    DiagVarianceWeighted,
    CovarianceWeighted,
}

/// What gets compared between observed and simulated data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "match", rename_all = "snake_case")]
pub enum Matching {
    /// Summary-statistic vectors under one of the induced metrics.
    Stats {
        set: StatisticSet,
        distance: StatDistance,
    },
    /// Auxiliary-criterion score: gradient of the simulated series' AR(2)
    /// criterion at the observed minimizer, through √(g′Ω̂g). None = identity.
    OlsScore { omega: Option<Matrix> },
    /// Mean squared deviation between raw planar paths.
    LvRawPath,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcceptedDraw {
    pub theta: Vec<f64>,
    pub distance: f64,
    /// Draw index within the run; the determinism anchor.
    pub index: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Posterior {
    /// Accepted draws in draw-index order.
    pub accepted: Vec<AcceptedDraw>,
    pub tolerance_used: f64,
    pub n_proposed: usize,
    /// Draws whose simulation failed (ODE blow-up etc.); never accepted.
    pub n_failed: usize,
    pub acceptance_rate: f64,
    /// True when nothing was accepted; a result, not an error, so that
    /// no-acceptance pathologies are observable.
    pub no_acceptances: bool,
}

impl Posterior {
    /// Values of coordinate `coord` across accepted draws.
    pub fn coordinate(&self, coord: usize) -> Vec<f64> {
        self.accepted.iter().map(|a| a.theta[coord]).collect()
    }

    pub fn dim(&self) -> usize {
        self.accepted.first().map_or(0, |a| a.theta.len())
    }

    /// CSV with header `theta1,...,thetaP,distance`.
    pub fn to_csv(&self) -> String {
        let p = self.dim();
        let mut out = String::new();
        for j in 1..=p {
            out.push_str(&format!("theta{j},"));
        }
        out.push_str("distance\n");
        for a in &self.accepted {
            for v in &a.theta {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{}\n", a.distance));
        }
        out
    }
}

/// The ⌈qN⌉-th smallest distance.
pub fn select_quantile_tolerance(distances: &[f64], q: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::SampleTooSmall { need: 1, got: 0 });
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidConfig(format!("quantile {q} outside (0,1)")));
    }
    let k = ((q * distances.len() as f64).ceil() as usize).max(1);
    let mut sorted = distances.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(sorted[k - 1])
}

/// Outcome of one proposal before the acceptance decision.
enum DrawOutcome {
    Distance(f64),
    Stats(Vec<f64>),
    Failed,
}

fn simulate_draw(
    model: &Model,
    matching: &Matching,
    prep: &ObservedPrep,
    config: &AbcConfig,
    prior_seed: u64,
    sim_seed: u64,
    i: u64,
) -> (Vec<f64>, DrawOutcome) {
    let theta = model.prior_draw(prior_seed, i);
    let sim = match model.simulate(&theta, config.series_length, compose(sim_seed, i)) {
        Ok(s) => s,
        Err(_) => return (theta, DrawOutcome::Failed),
    };
    let outcome = match (matching, prep) {
        (Matching::Stats { set, distance }, ObservedPrep::Stats(obs)) => {
            match evaluate_statistic_set(set, &sim) {
                Ok(stats) => match distance {
                    StatDistance::Euclidean => match euclidean(obs, &stats) {
                        Ok(d) => DrawOutcome::Distance(d),
                        Err(_) => DrawOutcome::Failed,
                    },
                    // Weighting data comes from the whole batch later.
                    _ => DrawOutcome::Stats(stats),
                },
                Err(_) => DrawOutcome::Failed,
            }
        }
        (Matching::OlsScore { omega }, ObservedPrep::Score(beta_hat)) => {
            let scalar = sim.as_scalar();
            let g = scalar.and_then(|s| ols_ar2_criterion_gradient(s, *beta_hat).ok());
            match g.and_then(|g| score_norm(&g, omega.as_ref()).ok()) {
                Some(d) => DrawOutcome::Distance(d),
                None => DrawOutcome::Failed,
            }
        }
        // Raw-path matching is handled inline by the caller, which holds a
        // borrow of the observed series.
        _ => DrawOutcome::Failed,
    };
    (theta, outcome)
}

enum ObservedPrep {
    Stats(Vec<f64>),
    Score([f64; 2]),
    Path,
}

/// Rejection ABC. Deterministic in (config.seed); independent of worker
/// count because draw i is a pure function of (seed, i).
pub fn run_rejection_abc(
    observed: &SimOutput,
    model: &Model,
    matching: &Matching,
    config: &AbcConfig,
) -> Result<Posterior> {
    config.validate()?;
    let observed_len = match observed {
        SimOutput::Scalar(s) => s.len(),
        SimOutput::Planar(p) => p.len(),
    };
    if observed_len != config.series_length {
        return Err(Error::DimensionMismatch {
            expected: config.series_length,
            got: observed_len,
        });
    }
    if observed_len == 0 {
        return Err(Error::SeriesTooShort { need: 1, got: 0 });
    }

    // Observed-side precomputation, once.
    let prep = match matching {
        Matching::Stats { set, .. } => {
            ObservedPrep::Stats(evaluate_statistic_set(set, observed)?)
        }
        Matching::OlsScore { omega } => {
            if let Some(m) = omega {
                cholesky(m)?; // reject non-PD weights up front
            }
            let s = observed.as_scalar().ok_or(Error::InvalidConfig(
                "auxiliary score matching needs a scalar series".into(),
            ))?;
            ObservedPrep::Score(ols_ar2_estimate(s)?.beta)
        }
        Matching::LvRawPath => {
            observed.as_planar().ok_or(Error::InvalidConfig(
                "raw-path matching needs a planar series".into(),
            ))?;
            ObservedPrep::Path
        }
    };

    let prior_seed = child_seed(config.seed, "prior");
    let sim_seed = child_seed(config.seed, "sim");
    let n = config.n_draws;

    let outcomes: Vec<(Vec<f64>, DrawOutcome)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let (theta, outcome) = match (matching, &prep) {
                // Raw-path matching needs the observed series in scope; the
                // generic helper cannot borrow it through ObservedPrep.
                (Matching::LvRawPath, _) => {
                    let theta = model.prior_draw(prior_seed, i);
                    let obs_path = observed.as_planar().expect("checked above");
                    match model.simulate(&theta, config.series_length, compose(sim_seed, i)) {
                        Ok(SimOutput::Planar(z)) => match lv_raw_path_distance(obs_path, &z) {
                            Ok(d) => (theta, DrawOutcome::Distance(d)),
                            Err(_) => (theta, DrawOutcome::Failed),
                        },
                        Ok(SimOutput::Scalar(_)) | Err(_) => (theta, DrawOutcome::Failed),
                    }
                }
                _ => simulate_draw(model, matching, &prep, config, prior_seed, sim_seed, i),
            };
            (theta, outcome)
        })
        .collect();

    // Resolve batch-dependent weighting, then distances for the stats kinds
    // that needed the whole batch.
    let distances: Vec<f64> = match matching {
        Matching::Stats { distance, .. } if *distance != StatDistance::Euclidean => {
            let obs = match &prep {
                ObservedPrep::Stats(o) => o,
                _ => unreachable!(),
            };
            let sim_stats: Vec<Vec<f64>> = outcomes
                .iter()
                .filter_map(|(_, o)| match o {
                    DrawOutcome::Stats(s) => Some(s.clone()),
                    _ => None,
                })
                .collect();
            if sim_stats.len() < 2 {
                return Err(Error::SampleTooSmall { need: 2, got: sim_stats.len() });
            }
            match distance {
                StatDistance::DiagVarianceWeighted => {
                    let sd = component_stds(&sim_stats)?;
                    if sd.iter().any(|&s| !(s > 0.0)) {
                        return Err(Error::InvalidConfig(
                            "a statistic has zero variance across simulations".into(),
                        ));
                    }
                    outcomes
                        .par_iter()
                        .map(|(_, o)| match o {
                            DrawOutcome::Stats(s) => {
                                diag_weighted(obs, s, &sd).unwrap_or(f64::NAN)
                            }
                            _ => f64::NAN,
                        })
                        .collect()
                }
                StatDistance::CovarianceWeighted => {
                    let cov = covariance(&sim_stats)?;
                    let l = cholesky(&cov)?;
                    outcomes
                        .par_iter()
                        .map(|(_, o)| match o {
                            DrawOutcome::Stats(s) => mahalanobis(obs, s, &l).unwrap_or(f64::NAN),
                            _ => f64::NAN,
                        })
                        .collect()
                }
                StatDistance::Euclidean => unreachable!(),
            }
        }
        _ => outcomes
            .iter()
            .map(|(_, o)| match o {
                DrawOutcome::Distance(d) => *d,
                DrawOutcome::Failed => f64::NAN,
                DrawOutcome::Stats(_) => unreachable!("euclidean distances are inline"),
            })
            .collect(),
    };

    let n_failed = distances.iter().filter(|d| d.is_nan()).count();
    let thetas: Vec<Vec<f64>> = outcomes.into_iter().map(|(t, _)| t).collect();
    assemble_posterior(&thetas, &distances, n_failed, config)
}

/// Apply the tolerance rule to a finished batch of (theta, distance) pairs.
/// Failed draws carry NaN distances and are never accepted.
pub(crate) fn assemble_posterior(
    thetas: &[Vec<f64>],
    distances: &[f64],
    n_failed: usize,
    config: &AbcConfig,
) -> Result<Posterior> {
    let n = config.n_draws;
    let mut accepted_idx: Vec<usize> = Vec::new();
    let tolerance_used;
    match config.tolerance {
        ToleranceRule::Absolute(eps) => {
            tolerance_used = eps;
            for (i, &d) in distances.iter().enumerate() {
                // NaN (failed draw) never satisfies d <= eps.
                if d <= eps {
                    accepted_idx.push(i);
                }
            }
        }
        ToleranceRule::Quantile(q) => {
            let k = ((q * n as f64).ceil() as usize).max(1);
            // Order by (distance, index); NaN sorts last under total_cmp.
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_unstable_by(|&a, &b| {
                distances[a].total_cmp(&distances[b]).then(a.cmp(&b))
            });
            let take = k.min(n - n_failed);
            accepted_idx = order[..take].to_vec();
            accepted_idx.sort_unstable();
            tolerance_used = accepted_idx
                .iter()
                .map(|&i| distances[i])
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }

    let accepted: Vec<AcceptedDraw> = accepted_idx
        .iter()
        .map(|&i| AcceptedDraw {
            theta: thetas[i].clone(),
            distance: distances[i],
            index: i as u64,
        })
        .collect();
    let no_acceptances = accepted.is_empty();
    Ok(Posterior {
        acceptance_rate: accepted.len() as f64 / n as f64,
        accepted,
        tolerance_used,
        n_proposed: n,
        n_failed,
        no_acceptances,
    })
}

/// Kernel acceptance probability exp(−u²/ε²): the smoothing kernel scaled by
/// its value at 0 so it is a valid probability. The unnormalized kernel's
/// exponent is −u²/ε² as printed (not the usual −u²/2ε²); kept verbatim.
pub fn kernel_accept_probability(u: f64, epsilon: f64) -> f64 {
    (-(u * u) / (epsilon * epsilon)).exp()
}

/// Kernel-accept ABC for a one-dimensional summary statistic.
pub fn run_kernel_abc(
    observed: &SimOutput,
    model: &Model,
    set: &StatisticSet,
    epsilon: f64,
    config: &AbcConfig,
) -> Result<Posterior> {
    config.validate()?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("kernel bandwidth {epsilon} must be > 0")));
    }
    if set.dim() != 1 {
        return Err(Error::InvalidConfig(
            "kernel acceptance is defined for a scalar summary statistic".into(),
        ));
    }
    let obs = evaluate_statistic_set(set, observed)?[0];

    let prior_seed = child_seed(config.seed, "prior");
    let sim_seed = child_seed(config.seed, "sim");
    let accept_seed = child_seed(config.seed, "accept");
    let n = config.n_draws;

    struct Row {
        theta: Vec<f64>,
        dist: f64,
        keep: bool,
        failed: bool,
    }

    let rows: Vec<Row> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let theta = model.prior_draw(prior_seed, i);
            match model
                .simulate(&theta, config.series_length, compose(sim_seed, i))
                .and_then(|sim| evaluate_statistic_set(set, &sim))
            {
                Ok(stats) => {
                    let u = obs - stats[0];
                    let p = kernel_accept_probability(u, epsilon);
                    let coin: f64 = stream_rng(accept_seed, i).random();
                    Row { theta, dist: u.abs(), keep: coin < p, failed: false }
                }
                Err(_) => Row { theta, dist: f64::NAN, keep: false, failed: true },
            }
        })
        .collect();

    let n_failed = rows.iter().filter(|r| r.failed).count();
    let accepted: Vec<AcceptedDraw> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.keep)
        .map(|(i, r)| AcceptedDraw { theta: r.theta.clone(), distance: r.dist, index: i as u64 })
        .collect();
    let no_acceptances = accepted.is_empty();
    Ok(Posterior {
        acceptance_rate: accepted.len() as f64 / n as f64,
        accepted,
        tolerance_used: epsilon,
        n_proposed: n,
        n_failed,
        no_acceptances,
    })
}

/// Coordinate-wise posterior location and scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: Vec<f64>,
    /// Divisor-n std of accepted draws.
    pub std: Vec<f64>,
    /// Marginal KDE argmax per coordinate; None when any marginal has fewer
    /// than 2 distinct values.
    pub mode: Option<Vec<f64>>,
    pub n_accepted: usize,
}

/// Marginal KDE of one coordinate of the accepted draws.
pub fn kde_marginal(
    posterior: &Posterior,
    coordinate: usize,
    grid_points: usize,
    span: Option<(f64, f64)>,
) -> Result<KdeEstimate> {
    let samples = posterior.coordinate(coordinate);
    kde_1d(&samples, grid_points, span)
}

pub fn posterior_summaries(posterior: &Posterior) -> Result<PosteriorSummary> {
    let n = posterior.accepted.len();
    if n == 0 {
        return Err(Error::SampleTooSmall { need: 1, got: 0 });
    }
    let p = posterior.dim();
    let mut mean = vec![0.0; p];
    for a in &posterior.accepted {
        for j in 0..p {
            mean[j] += a.theta[j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut std = vec![0.0; p];
    for a in &posterior.accepted {
        for j in 0..p {
            let u = a.theta[j] - mean[j];
            std[j] += u * u;
        }
    }
    for s in &mut std {
        *s = (*s / n as f64).sqrt();
    }
    let mode = (0..p)
        .map(|j| kde_marginal(posterior, j, DEFAULT_GRID_POINTS, None).map(|k| k.mode()))
        .collect::<Result<Vec<f64>>>()
        .ok();
    Ok(PosteriorSummary { mean, std, mode, n_accepted: n })
}

/// Fraction of accepted mass at least `delta` away from `theta0` in the
/// Euclidean norm: the empirical posterior mass outside the δ-neighborhood.
pub fn concentration_probability(
    posterior: &Posterior,
    theta0: &[f64],
    delta: f64,
) -> Result<f64> {
    if posterior.accepted.is_empty() {
        return Err(Error::SampleTooSmall { need: 1, got: 0 });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig(format!("delta {delta} must be > 0")));
    }
    let far = posterior
        .accepted
        .iter()
        .filter(|a| euclidean(&a.theta, theta0).map(|d| d >= delta).unwrap_or(true))
        .count();
    Ok(far as f64 / posterior.accepted.len() as f64)
}
