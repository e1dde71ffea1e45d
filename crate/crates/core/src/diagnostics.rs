//! Posterior diagnostics built on the rejection engine: nested
//! statistic-augmentation sequences with jump detection between steps, and
//! concentration sweeps across sample sizes.

use crate::abc::{
    assemble_posterior, concentration_probability, posterior_summaries, AbcConfig, Matching,
    PosteriorSummary, StatDistance, ToleranceRule,
};
use crate::distance::{cholesky, component_stds, covariance, diag_weighted, euclidean, mahalanobis};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::{child_seed, compose};
use crate::series::SimOutput;
use crate::summaries::{evaluate_statistic_set, StatisticSet};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

/// Where the conditioning series comes from: simulated fresh at a known
/// truth, or handed in.
#[derive(Debug, Clone)]
pub enum ObservedSource {
    Synthetic { theta0: Vec<f64> },
    Provided(SimOutput),
}

/// A sequence of prefix-nested statistic sets to run against one observed
/// series with everything else held fixed.
#[derive(Debug, Clone)]
pub struct AugmentationPlan {
    pub model: Model,
    pub source: ObservedSource,
    /// Each set must extend (or equal) the one before it.
    pub steps: Vec<StatisticSet>,
    pub distance: StatDistance,
    pub config: AbcConfig,
    /// Jump flag threshold in pooled-std units.
    pub threshold: f64,
}

pub const DEFAULT_JUMP_THRESHOLD: f64 = 3.0;

impl AugmentationPlan {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.steps.is_empty() {
            return Err(Error::InvalidConfig("augmentation plan has no steps".into()));
        }
        for k in 1..self.steps.len() {
            if !self.steps[k - 1].is_prefix_of(&self.steps[k]) {
                return Err(Error::NonNestedPlan { step: k });
            }
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidConfig("jump threshold must be positive".into()));
        }
        match &self.source {
            ObservedSource::Synthetic { theta0 } => {
                if !self.model.in_support(theta0) {
                    return Err(Error::OutsideRegion {
                        theta: theta0.clone(),
                        region: "model support",
                    });
                }
            }
            ObservedSource::Provided(out) => {
                let len = match out {
                    SimOutput::Scalar(s) => s.len(),
                    SimOutput::Planar(p) => p.len(),
                };
                if len != self.config.series_length {
                    return Err(Error::DimensionMismatch {
                        expected: self.config.series_length,
                        got: len,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Distance between consecutive posterior modes in pooled-std units. The
/// flag is driven by the smaller of the two step scales so a collapse of
/// the later posterior onto a far lobe still registers; the previous-step
/// scaling is reported alongside.
#[derive(Debug, Clone, Serialize)]
pub struct JumpReport {
    pub metric: f64,
    pub metric_prev_scale: f64,
    pub flag: bool,
    pub threshold: f64,
}

fn pooled_std(summary: &PosteriorSummary) -> f64 {
    let d = summary.std.len() as f64;
    (summary.std.iter().map(|s| s * s).sum::<f64>() / d).sqrt()
}

/// Mode when the KDE produced one, otherwise the mean (a posterior whose
/// marginals are degenerate sits on a point, where the two coincide).
fn location(summary: &PosteriorSummary) -> &[f64] {
    summary.mode.as_deref().unwrap_or(&summary.mean)
}

/// Compare two posterior summaries for a relocation of the main mass.
pub fn detect_jump(
    prev: &PosteriorSummary,
    curr: &PosteriorSummary,
    threshold: f64,
) -> Result<JumpReport> {
    if prev.mean.len() != curr.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: prev.mean.len(),
            got: curr.mean.len(),
        });
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidConfig("jump threshold must be positive".into()));
    }
    let gap = euclidean(location(prev), location(curr))?;
    let (p_prev, p_curr) = (pooled_std(prev), pooled_std(curr));
    let scale = p_prev.min(p_curr);
    let (metric, metric_prev_scale) = if gap == 0.0 {
        (0.0, 0.0)
    } else {
        (
            if scale > 0.0 { gap / scale } else { f64::INFINITY },
            if p_prev > 0.0 { gap / p_prev } else { f64::INFINITY },
        )
    };
    Ok(JumpReport { metric, metric_prev_scale, flag: metric > threshold, threshold })
}

/// One augmentation step's posterior in summary form.
#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub set_name: String,
    pub dim: usize,
    pub tolerance_used: f64,
    pub n_accepted: usize,
    pub summary: PosteriorSummary,
    pub jump: Option<JumpReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AugmentationReport {
    pub steps: Vec<StepReport>,
    pub threshold: f64,
    pub n_draws: usize,
    pub series_length: usize,
    pub seed: u64,
}

impl AugmentationReport {
    /// Tidy one-row-per-step table.
    pub fn to_csv(&self) -> String {
        let p = self.steps.first().map_or(0, |s| s.summary.mean.len());
        let mut out = String::from("step,set,dim,tolerance,n_accepted");
        for j in 1..=p {
            let _ = write!(out, ",mode{j}");
        }
        for j in 1..=p {
            let _ = write!(out, ",mean{j}");
        }
        for j in 1..=p {
            let _ = write!(out, ",std{j}");
        }
        out.push_str(",jump_metric,jump_metric_prev_scale,jump_flag\n");
        for (k, s) in self.steps.iter().enumerate() {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                k, s.set_name, s.dim, s.tolerance_used, s.n_accepted
            );
            for j in 0..p {
                match &s.summary.mode {
                    Some(m) => {
                        let _ = write!(out, ",{}", m[j]);
                    }
                    None => out.push(','),
                }
            }
            for v in &s.summary.mean {
                let _ = write!(out, ",{v}");
            }
            for v in &s.summary.std {
                let _ = write!(out, ",{v}");
            }
            match &s.jump {
                Some(r) => {
                    let _ = write!(out, ",{},{},{}", r.metric, r.metric_prev_scale, r.flag);
                }
                None => out.push_str(",,,"),
            }
            out.push('\n');
        }
        out
    }
}

/// Run the nested sequence against one observed series with a shared seed:
/// prior draws and simulated series are produced once and every step reuses
/// them, recomputing only its own statistics (prefixes of the final step's
/// vector, since the plan is nested). A draw whose full statistic vector
/// fails to evaluate is failed for every step, keeping the step posteriors
/// exactly what independent runs with the same seed would produce.
pub fn run_augmentation_sequence(plan: &AugmentationPlan) -> Result<AugmentationReport> {
    plan.validate()?;
    let config = &plan.config;
    let full = plan.steps.last().expect("validated nonempty");

    let observed: SimOutput = match &plan.source {
        ObservedSource::Synthetic { theta0 } => plan.model.simulate(
            theta0,
            config.series_length,
            child_seed(config.seed, "observed"),
        )?,
        ObservedSource::Provided(out) => out.clone(),
    };
    let observed_full = evaluate_statistic_set(full, &observed)?;

    let prior_seed = child_seed(config.seed, "prior");
    let sim_seed = child_seed(config.seed, "sim");
    let n = config.n_draws;

    // One simulation pass: parameter draw and full statistic vector each.
    let draws: Vec<(Vec<f64>, Option<Vec<f64>>)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let theta = plan.model.prior_draw(prior_seed, i);
            let stats = plan
                .model
                .simulate(&theta, config.series_length, compose(sim_seed, i))
                .and_then(|sim| evaluate_statistic_set(full, &sim))
                .ok();
            (theta, stats)
        })
        .collect();
    let thetas: Vec<Vec<f64>> = draws.iter().map(|(t, _)| t.clone()).collect();
    let n_failed = draws.iter().filter(|(_, s)| s.is_none()).count();

    let mut steps = Vec::with_capacity(plan.steps.len());
    let mut previous: Option<PosteriorSummary> = None;
    for set in &plan.steps {
        let d = set.dim();
        let obs = &observed_full[..d];
        let distances: Vec<f64> = match plan.distance {
            StatDistance::Euclidean => draws
                .par_iter()
                .map(|(_, s)| match s {
                    Some(s) => euclidean(obs, &s[..d]).unwrap_or(f64::NAN),
                    None => f64::NAN,
                })
                .collect(),
            StatDistance::DiagVarianceWeighted | StatDistance::CovarianceWeighted => {
                let ok: Vec<Vec<f64>> = draws
                    .iter()
                    .filter_map(|(_, s)| s.as_ref().map(|v| v[..d].to_vec()))
                    .collect();
                if ok.len() < 2 {
                    return Err(Error::SampleTooSmall { need: 2, got: ok.len() });
                }
                if plan.distance == StatDistance::DiagVarianceWeighted {
                    let sd = component_stds(&ok)?;
                    if sd.iter().any(|&s| !(s > 0.0)) {
                        return Err(Error::InvalidConfig(
                            "a statistic has zero variance across simulations".into(),
                        ));
                    }
                    draws
                        .par_iter()
                        .map(|(_, s)| match s {
                            Some(s) => diag_weighted(obs, &s[..d], &sd).unwrap_or(f64::NAN),
                            None => f64::NAN,
                        })
                        .collect()
                } else {
                    let l = cholesky(&covariance(&ok)?)?;
                    draws
                        .par_iter()
                        .map(|(_, s)| match s {
                            Some(s) => mahalanobis(obs, &s[..d], &l).unwrap_or(f64::NAN),
                            None => f64::NAN,
                        })
                        .collect()
                }
            }
        };
        let posterior = assemble_posterior(&thetas, &distances, n_failed, config)?;
        let summary = posterior_summaries(&posterior)?;
        let jump = match &previous {
            Some(prev) => Some(detect_jump(prev, &summary, plan.threshold)?),
            None => None,
        };
        steps.push(StepReport {
            set_name: set.name().to_string(),
            dim: d,
            tolerance_used: posterior.tolerance_used,
            n_accepted: summary.n_accepted,
            summary: summary.clone(),
            jump,
        });
        previous = Some(summary);
    }
    Ok(AugmentationReport {
        steps,
        threshold: plan.threshold,
        n_draws: n,
        series_length: config.series_length,
        seed: config.seed,
    })
}

/// Posterior concentration across sample sizes: fresh observed series per
/// size, full rejection run each, empirical mass outside the
/// delta-neighborhood of the truth.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyProbe {
    pub delta: f64,
    pub sizes: Vec<usize>,
    /// Empirical Pr(|theta - theta0| >= delta) per size.
    pub probabilities: Vec<f64>,
    pub posterior_stds: Vec<Vec<f64>>,
    pub tolerances_used: Vec<f64>,
    pub n_accepted: Vec<usize>,
    /// Quantile actually applied per size.
    pub quantiles: Vec<f64>,
}

impl ConsistencyProbe {
    pub fn to_csv(&self) -> String {
        let p = self.posterior_stds.first().map_or(0, |s| s.len());
        let mut out = String::from("t,quantile,tolerance,n_accepted,prob_outside_delta");
        for j in 1..=p {
            let _ = write!(out, ",std{j}");
        }
        out.push('\n');
        for (k, &t) in self.sizes.iter().enumerate() {
            let _ = write!(
                out,
                "{t},{},{},{},{}",
                self.quantiles[k], self.tolerances_used[k], self.n_accepted[k],
                self.probabilities[k]
            );
            for v in &self.posterior_stds[k] {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Sweep sample sizes with a fixed design. `quantile_schedule`, when given,
/// overrides the config's tolerance rule with one retention fraction per
/// size, which is how a tolerance shrinking jointly with the sample size is
/// expressed. Sizes run in parallel; each size gets an independent run seed
/// and a fresh observed series keyed by the size itself.
pub fn consistency_sweep(
    model: &Model,
    theta0: &[f64],
    set: &StatisticSet,
    sizes: &[usize],
    delta: f64,
    config: &AbcConfig,
    quantile_schedule: Option<&[f64]>,
) -> Result<ConsistencyProbe> {
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("size list is empty".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("sizes must be strictly ascending".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig(format!("delta {delta} must be > 0")));
    }
    if let Some(qs) = quantile_schedule {
        if qs.len() != sizes.len() {
            return Err(Error::DimensionMismatch { expected: sizes.len(), got: qs.len() });
        }
        if qs.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(Error::InvalidConfig("schedule quantiles must lie in (0,1)".into()));
        }
    }
    if !model.in_support(theta0) {
        return Err(Error::OutsideRegion {
            theta: theta0.to_vec(),
            region: "model support",
        });
    }
    let obs_stream = child_seed(config.seed, "observed");
    let run_stream = child_seed(config.seed, "run");

    let rows: Vec<(f64, Vec<f64>, f64, usize, f64)> = sizes
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let tolerance = match quantile_schedule {
                Some(qs) => ToleranceRule::Quantile(qs[k]),
                None => config.tolerance,
            };
            let quantile = match tolerance {
                ToleranceRule::Quantile(q) => q,
                ToleranceRule::Absolute(_) => f64::NAN,
            };
            let cfg = AbcConfig {
                n_draws: config.n_draws,
                tolerance,
                seed: compose(run_stream, t as u64),
                series_length: t,
            };
            let observed = model.simulate(theta0, t, compose(obs_stream, t as u64))?;
            let posterior = run_rejection(model, &observed, set, &cfg)?;
            let prob = concentration_probability(&posterior, theta0, delta)?;
            let summary = posterior_summaries(&posterior)?;
            Ok((
                prob,
                summary.std,
                posterior.tolerance_used,
                summary.n_accepted,
                quantile,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut probe = ConsistencyProbe {
        delta,
        sizes: sizes.to_vec(),
        probabilities: Vec::new(),
        posterior_stds: Vec::new(),
        tolerances_used: Vec::new(),
        n_accepted: Vec::new(),
        quantiles: Vec::new(),
    };
    for (prob, stds, tol, acc, q) in rows {
        probe.probabilities.push(prob);
        probe.posterior_stds.push(stds);
        probe.tolerances_used.push(tol);
        probe.n_accepted.push(acc);
        probe.quantiles.push(q);
    }
    Ok(probe)
}

fn run_rejection(
    model: &Model,
    observed: &SimOutput,
    set: &StatisticSet,
    cfg: &AbcConfig,
) -> Result<crate::abc::Posterior> {
    crate::abc::run_rejection_abc(
        observed,
        model,
        &Matching::Stats { set: set.clone(), distance: StatDistance::Euclidean },
        cfg,
    )
}
