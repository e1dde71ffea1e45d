use abckit::binding::{
    check_injectivity_analytic, grid_2d, linspace, verify_one_to_one, BindingMap, ThetaRegion,
};
use abckit::StatisticSet;

use crate::commands::{init_workers, required};
use crate::config::{self, RawInjectivityConfig};
use crate::error::{CliError, Result};
use crate::manifest::RunWriter;
use crate::CommonArgs;

const GRID_BUDGET: usize = 400;

fn analytic_binding(model: &str, stats: &[String]) -> Result<BindingMap> {
    match (model, stats) {
        ("ar1", [s]) if s == "acov1" => Ok(BindingMap::Ar1Acov1),
        ("ma2", [s]) if s == "ols_ar2" => Ok(BindingMap::OlsAr2OnMa2),
        ("ma2", list) => Ok(BindingMap::Ma2Stats(config::parse_stat_set(list)?)),
        ("ar1", _) => Err(CliError::config("ar1 analytic scans cover the acov1 map only")),
        (other, _) => Err(CliError::config(format!(
            "no analytic binding for model '{other}'"
        ))),
    }
}

pub fn cmd_diagnose_injectivity(
    common: &CommonArgs,
    model_flag: Option<String>,
    stats_flag: Option<Vec<String>>,
    method_flag: Option<String>,
) -> Result<()> {
    init_workers(common.workers)?;
    let mut raw: RawInjectivityConfig = match &common.config {
        Some(path) => config::load(path)?,
        None => RawInjectivityConfig::default(),
    };
    if model_flag.is_some() {
        raw.model = model_flag;
    }
    if stats_flag.is_some() {
        raw.stats = stats_flag;
    }
    if method_flag.is_some() {
        raw.method = method_flag;
    }
    let method = raw.method.clone().unwrap_or_else(|| "analytic".into());
    let model_name = required(raw.model.clone(), "model")?;
    let stats = match (&raw.stats, model_name.as_str()) {
        (Some(list), _) => list.clone(),
        (None, "ar1") => vec!["acov1".into()],
        (None, _) => return Err(CliError::config("missing config key `stats`")),
    };
    let rho_min = raw.rho_min.unwrap_or(0.03);
    let tau = raw.tau.unwrap_or(0.01);
    let seed = config::resolve_seed(common.seed, raw.seed)?;
    raw.seed = Some(seed);
    raw.method = Some(method.clone());
    raw.model = Some(model_name.clone());
    raw.stats = Some(stats.clone());

    let echo = serde_json::to_value(&raw)
        .map_err(|e| CliError::runtime(format!("config echo: {e}")))?;
    let mut writer =
        RunWriter::new(&common.out, "diagnose injectivity", seed, common.workers)?;

    let verdict = match method.as_str() {
        "analytic" => {
            let binding = analytic_binding(&model_name, &stats)?;
            let region = match binding.param_dim() {
                1 => {
                    let [lo, hi] = raw.region.unwrap_or([-0.99, 0.99]);
                    ThetaRegion::interval(lo, hi)
                }
                _ => {
                    if raw.region.is_some() {
                        return Err(CliError::config(
                            "`region` applies to one-parameter maps; the two-parameter \
                             domain is fixed to the invertibility triangle",
                        ));
                    }
                    ThetaRegion::ma2_triangle()
                }
            };
            let points_per_dim = raw.points_per_dim.unwrap_or(300);
            let probes = raw.probes.clone().unwrap_or_default();
            check_injectivity_analytic(&binding, &region, points_per_dim, rho_min, tau, &probes)?
        }
        "simulated" => {
            let model = config::parse_model(&model_name)?;
            let set: StatisticSet = config::parse_stat_set(&stats)?;
            let t_star = raw.t_star.unwrap_or(1_000_000);
            let points: Vec<Vec<f64>> = match (&raw.points, &raw.grid, &raw.grid_points) {
                (Some(p), None, None) => p.clone(),
                (None, Some(grid), Some(counts)) => {
                    if grid.len() != model.dim() || counts.len() != model.dim() {
                        return Err(CliError::config(format!(
                            "`grid` and `grid_points` must each have {} entries",
                            model.dim()
                        )));
                    }
                    let total: usize = counts.iter().product();
                    if total > GRID_BUDGET {
                        return Err(CliError::config(format!(
                            "long-simulation scan is budgeted at {GRID_BUDGET} points; \
                             grid asks for {total}"
                        )));
                    }
                    match model.dim() {
                        1 => linspace(grid[0][0], grid[0][1], counts[0])
                            .into_iter()
                            .map(|v| vec![v])
                            .collect(),
                        2 => grid_2d(&[grid[0], grid[1]], [counts[0], counts[1]]),
                        d => {
                            return Err(CliError::config(format!(
                                "grid scans support 1 or 2 parameters, model has {d}"
                            )))
                        }
                    }
                }
                (None, None, _) | (None, _, None) => {
                    return Err(CliError::config(
                        "simulated scans need `points`, or `grid` with `grid_points`",
                    ))
                }
                (Some(_), _, _) => {
                    return Err(CliError::config(
                        "`points` and `grid` are mutually exclusive",
                    ))
                }
            };
            verify_one_to_one(&model, &set, &points, t_star, tau, rho_min, seed)?
        }
        other => {
            return Err(CliError::config(format!(
                "unknown method '{other}' (expected analytic or simulated)"
            )))
        }
    };

    let json = serde_json::to_string_pretty(&verdict)
        .map_err(|e| CliError::runtime(format!("verdict encode: {e}")))?;
    writer.write("injectivity.json", &json)?;
    if verdict.injective {
        println!(
            "verdict: injective over {} points (rho_min {}, tau {})",
            verdict.points_checked, verdict.rho_min, verdict.tau
        );
    } else if let Some(w) = &verdict.witness {
        println!(
            "verdict: NOT injective; witness {:?} and {:?} map within {:.3e}",
            w.theta_a, w.theta_b, w.value_gap
        );
    } else {
        println!("verdict: NOT injective");
    }
    writer.finish(&echo)
}
