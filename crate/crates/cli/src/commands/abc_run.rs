use abckit::gaussian::pseudo_posterior_params;
use abckit::kde::DEFAULT_GRID_POINTS;
use abckit::rng::{child_seed, compose};
use abckit::summaries::sample_mean;
use abckit::{
    kde_marginal, run_kernel_abc, run_rejection_abc, AbcConfig, Error, Matching, Model,
    StatDistance, StatisticSet, ToleranceRule,
};

use crate::commands::{init_workers, required};
use crate::config::{self, RawRunConfig};
use crate::error::{CliError, Result};
use crate::manifest::RunWriter;
use crate::CommonArgs;

enum Algorithm {
    Rejection(StatDistance),
    Kernel(f64),
}

fn run_defaults() -> RawRunConfig {
    RawRunConfig {
        distance: Some("euclidean".into()),
        algorithm: Some("rejection".into()),
        kde_grid_points: Some(DEFAULT_GRID_POINTS),
        ..RawRunConfig::default()
    }
}

pub fn cmd_abc_run(common: &CommonArgs, preset_flag: Option<String>) -> Result<()> {
    init_workers(common.workers)?;
    let mut raw: RawRunConfig = match &common.config {
        Some(path) => config::load(path)?,
        None => RawRunConfig::default(),
    };
    if preset_flag.is_some() {
        raw.experiment = preset_flag;
    }
    let preset = raw.experiment.clone();
    let merged = match &preset {
        Some(name) => raw.merged_over(config::run_preset(name)?),
        None => raw,
    };
    let mut merged = merged.merged_over(run_defaults());
    let seed = config::resolve_seed(common.seed, merged.seed)?;
    merged.seed = Some(seed);

    let model = config::parse_model(&required(merged.model.clone(), "model")?)?;
    let theta0 = required(merged.theta0.clone(), "theta0")?;
    let sizes = match (merged.sizes.clone(), merged.series_length) {
        (Some(s), None) if !s.is_empty() => s,
        (Some(_), None) => return Err(CliError::config("`sizes` is empty")),
        (None, Some(t)) => vec![t],
        (Some(_), Some(_)) => {
            return Err(CliError::config("`sizes` and `series_length` are mutually exclusive"))
        }
        (None, None) => return Err(CliError::config("set `sizes` or `series_length`")),
    };
    let sets: Vec<StatisticSet> = match (merged.sets.clone(), merged.stats.clone()) {
        (Some(_), Some(_)) => {
            return Err(CliError::config("`sets` and `stats` are mutually exclusive"))
        }
        (Some(names), None) => names
            .iter()
            .map(|n| {
                StatisticSet::by_name(n)
                    .map_err(|_| CliError::config(format!("unknown statistic set '{n}'")))
            })
            .collect::<Result<_>>()?,
        (None, Some(list)) => vec![config::parse_stat_set(&list)?],
        (None, None) => return Err(CliError::config("set `sets` or `stats`")),
    };
    let algorithm = match required(merged.algorithm.clone(), "algorithm")?.as_str() {
        "rejection" => {
            if merged.epsilon.is_some() {
                return Err(CliError::config(
                    "`epsilon` is a kernel-algorithm key; rejection uses tolerance_*",
                ));
            }
            Algorithm::Rejection(config::parse_distance(&required(
                merged.distance.clone(),
                "distance",
            )?)?)
        }
        "kernel" => {
            if merged.tolerance_quantile.is_some() || merged.tolerance_absolute.is_some() {
                return Err(CliError::config(
                    "kernel acceptance uses `epsilon`, not tolerance_*",
                ));
            }
            if let Some(bad) = sets.iter().find(|s| s.dim() != 1) {
                return Err(CliError::config(format!(
                    "kernel acceptance needs a scalar statistic; set '{}' has dimension {}",
                    bad.name(),
                    bad.dim()
                )));
            }
            Algorithm::Kernel(required(merged.epsilon, "epsilon")?)
        }
        other => {
            return Err(CliError::config(format!(
                "unknown algorithm '{other}' (expected rejection or kernel)"
            )))
        }
    };
    let n_draws = required(merged.n_draws, "n_draws")?;
    let tolerance = match algorithm {
        Algorithm::Rejection(_) => {
            config::resolve_tolerance(merged.tolerance_quantile, merged.tolerance_absolute)?
        }
        // The kernel route coin-flips per draw; the radius rule is unused.
        Algorithm::Kernel(_) => ToleranceRule::Absolute(f64::INFINITY),
    };
    let grid_points = merged.kde_grid_points.unwrap_or(DEFAULT_GRID_POINTS);
    let observed_base =
        merged.observed_seed.unwrap_or_else(|| child_seed(seed, "observed"));

    let echo = serde_json::to_value(&merged)
        .map_err(|e| CliError::runtime(format!("config echo: {e}")))?;
    let mut writer = RunWriter::new(&common.out, "abc run", seed, common.workers)?;

    for (si, &size) in sizes.iter().enumerate() {
        // One observed draw per size, shared by every statistic set.
        let observed = model.simulate(&theta0, size, compose(observed_base, si as u64))?;
        for set in &sets {
            let run_config =
                AbcConfig { n_draws, tolerance: tolerance.clone(), seed, series_length: size };
            let posterior = match &algorithm {
                Algorithm::Rejection(distance) => {
                    let matching =
                        Matching::Stats { set: set.clone(), distance: distance.clone() };
                    run_rejection_abc(&observed, &model, &matching, &run_config)?
                }
                Algorithm::Kernel(epsilon) => {
                    run_kernel_abc(&observed, &model, set, *epsilon, &run_config)?
                }
            };
            let label = format!("{}_T{}", set.name(), size);
            writer.write(&format!("posterior_{label}.csv"), &posterior.to_csv())?;
            if posterior.no_acceptances {
                eprintln!("note: no acceptances for {label}; no density files written");
                continue;
            }
            let mut first_grid: Option<Vec<f64>> = None;
            for coord in 0..model.dim() {
                match kde_marginal(&posterior, coord, grid_points, None) {
                    Ok(kde) => {
                        if coord == 0 {
                            first_grid = Some(kde.grid.clone());
                        }
                        writer.write(
                            &format!("kde_{label}_theta{}.csv", coord + 1),
                            &kde.to_csv(),
                        )?;
                    }
                    // A point-mass marginal has no density estimate; the
                    // posterior file still carries the draws.
                    Err(Error::DegenerateSample) => {
                        eprintln!("note: degenerate marginal {label} theta{}", coord + 1)
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if let (Algorithm::Kernel(epsilon), Model::GaussMean, Some(grid)) =
                (&algorithm, &model, first_grid)
            {
                let series = observed.as_scalar().expect("scalar model");
                let eta_obs = sample_mean(series)?;
                let pp = pseudo_posterior_params(eta_obs, size, *epsilon)?;
                let mut csv = String::from("theta,density\n");
                for &x in &grid {
                    let z = (x - pp.mean) / pp.variance.sqrt();
                    let dens = (-0.5 * z * z).exp()
                        / (pp.variance.sqrt() * (2.0 * std::f64::consts::PI).sqrt());
                    csv.push_str(&format!("{x},{dens}\n"));
                }
                writer.write(&format!("analytic_{label}.csv"), &csv)?;
            }
        }
    }
    writer.finish(&echo)
}
