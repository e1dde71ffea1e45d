use abckit::lv::{LvConfig, LvMode};
use abckit::model::LV_PRIOR_BOX;
use abckit::rng::child_seed;
use abckit::{
    posterior_summaries, run_rejection_abc, AbcConfig, Matching, Model, StatDistance,
};
use serde::Serialize;

use crate::commands::{init_workers, required};
use crate::config::{self, RawLvStudyConfig};
use crate::error::{CliError, Result};
use crate::manifest::RunWriter;
use crate::CommonArgs;

#[derive(Debug, Serialize)]
struct LvStudyReport {
    mode: String,
    theta0: Vec<f64>,
    r_t: usize,
    n_draws: usize,
    tolerance_used: f64,
    n_accepted: usize,
    no_acceptances: bool,
    min_distance: Option<f64>,
    /// Deterministic mode only: the distance value no noiseless path can
    /// get under, up to sampling error in the observed draw.
    noise_floor: Option<f64>,
    posterior_mean: Option<Vec<f64>>,
    posterior_std: Option<Vec<f64>>,
}

pub fn cmd_lv_study(common: &CommonArgs, mode_flag: Option<String>) -> Result<()> {
    init_workers(common.workers)?;
    let mut raw: RawLvStudyConfig = match &common.config {
        Some(path) => config::load(path)?,
        None => RawLvStudyConfig::default(),
    };
    if mode_flag.is_some() {
        raw.mode = mode_flag;
    }
    let mode = required(raw.mode.clone(), "mode")?;
    let mut merged = raw.merged_over(config::lv_mode_defaults(&mode)?);
    let seed = config::resolve_seed(common.seed, merged.seed)?;
    merged.seed = Some(seed);

    let theta0 = required(merged.theta0.clone(), "theta0")?;
    let r_t = required(merged.r_t, "r_t")?;
    let n_draws = required(merged.n_draws, "n_draws")?;
    let matching = match required(merged.matching.clone(), "matching")?.as_str() {
        "raw_path" => Matching::LvRawPath,
        "stats" => Matching::Stats {
            set: config::parse_stat_set(&required(merged.stats.clone(), "stats")?)?,
            distance: StatDistance::Euclidean,
        },
        other => {
            return Err(CliError::config(format!(
                "unknown matching '{other}' (expected raw_path or stats)"
            )))
        }
    };
    let pseudo_model = match mode.as_str() {
        "deterministic" => Model::Lv {
            config: LvConfig::default(),
            mode: LvMode::Deterministic,
            prior_box: LV_PRIOR_BOX,
        },
        "noise_matched" => Model::lv_default(),
        other => {
            return Err(CliError::config(format!(
                "unknown mode '{other}' (expected deterministic or noise_matched)"
            )))
        }
    };
    // Mean squared gap between two independent noisy paths is
    // 2*(sd1^2+sd2^2)/2 per time point; the per-point floor for one noisy
    // path against any noiseless one is sd1^2+sd2^2, minus sampling slack.
    let noise_floor = if mode == "deterministic" {
        let sd = LvConfig::default().noise_sd;
        let e = sd[0] * sd[0] + sd[1] * sd[1];
        Some(e - 3.0 * e / (r_t as f64).sqrt())
    } else {
        None
    };
    let tolerance = match (merged.tolerance_quantile, merged.tolerance_absolute, &noise_floor) {
        (None, None, Some(floor)) => {
            merged.tolerance_absolute = Some(*floor);
            abckit::ToleranceRule::Absolute(*floor)
        }
        (q, a, _) => config::resolve_tolerance(q, a)?,
    };

    let observed_base =
        merged.observed_seed.unwrap_or_else(|| child_seed(seed, "observed"));
    // The observed path is always drawn with measurement noise; the mode
    // only changes what the sampler simulates against it.
    let observed = Model::lv_default().simulate(&theta0, r_t, observed_base)?;

    let echo = serde_json::to_value(&merged)
        .map_err(|e| CliError::runtime(format!("config echo: {e}")))?;
    let mut writer = RunWriter::new(&common.out, "lv-study", seed, common.workers)?;

    let run_config = AbcConfig { n_draws, tolerance, seed, series_length: r_t };
    let posterior = run_rejection_abc(&observed, &pseudo_model, &matching, &run_config)?;

    let min_distance = posterior
        .accepted
        .iter()
        .map(|a| a.distance)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |m| m.min(d))));
    let (posterior_mean, posterior_std) = if posterior.no_acceptances {
        (None, None)
    } else {
        let s = posterior_summaries(&posterior)?;
        (Some(s.mean), Some(s.std))
    };
    let report = LvStudyReport {
        mode: mode.clone(),
        theta0,
        r_t,
        n_draws,
        tolerance_used: posterior.tolerance_used,
        n_accepted: posterior.accepted.len(),
        no_acceptances: posterior.no_acceptances,
        min_distance,
        noise_floor,
        posterior_mean,
        posterior_std,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::runtime(format!("report encode: {e}")))?;
    writer.write("study.json", &json)?;
    if !posterior.no_acceptances {
        writer.write("posterior.csv", &posterior.to_csv())?;
    }
    match (&report.no_acceptances, &report.noise_floor) {
        (true, Some(floor)) => println!(
            "no acceptances: every simulated path stayed above the noise floor {floor:.4}"
        ),
        (true, None) => println!("no acceptances at the requested tolerance"),
        (false, _) => {
            let mean = report.posterior_mean.as_ref().expect("non-empty");
            println!(
                "accepted {} of {} draws; posterior mean ({:.4}, {:.4})",
                report.n_accepted, n_draws, mean[0], mean[1]
            );
        }
    }
    writer.finish(&echo)
}
