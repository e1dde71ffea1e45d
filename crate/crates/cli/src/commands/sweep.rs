use abckit::gaussian::{sequential_limit_sweep, EtaMode, LimitOrder};

use crate::commands::{init_workers, required};
use crate::config::{self, RawSweepConfig};
use crate::error::{CliError, Result};
use crate::manifest::RunWriter;
use crate::CommonArgs;

pub fn cmd_analytic_sweep(common: &CommonArgs, order_flag: Option<String>) -> Result<()> {
    init_workers(common.workers)?;
    let mut raw: RawSweepConfig = match &common.config {
        Some(path) => config::load(path)?,
        None => RawSweepConfig::default(),
    };
    if order_flag.is_some() {
        raw.order = order_flag;
    }
    let mut merged = raw.merged_over(config::sweep_defaults());
    let seed = config::resolve_seed(common.seed, merged.seed)?;
    merged.seed = Some(seed);

    let orders: Vec<LimitOrder> = match required(merged.order.clone(), "order")?.as_str() {
        "both" => vec![LimitOrder::EpsThenT, LimitOrder::TThenEps],
        "eps_then_t" => vec![LimitOrder::EpsThenT],
        "t_then_eps" => vec![LimitOrder::TThenEps],
        other => {
            return Err(CliError::config(format!(
                "unknown order '{other}' (expected eps_then_t, t_then_eps, or both)"
            )))
        }
    };
    let eta_mode = match required(merged.eta_mode.clone(), "eta_mode")?.as_str() {
        "simulated" => EtaMode::Simulated,
        "at_truth" => EtaMode::AtTruth,
        other => {
            return Err(CliError::config(format!(
                "unknown eta_mode '{other}' (expected simulated or at_truth)"
            )))
        }
    };
    let theta0 = required(merged.theta0, "theta0")?;
    let delta = required(merged.delta, "delta")?;
    let t_grid = required(merged.t_grid.clone(), "t_grid")?;
    let eps_grid = required(merged.eps_grid.clone(), "eps_grid")?;

    let echo = serde_json::to_value(&merged)
        .map_err(|e| CliError::runtime(format!("config echo: {e}")))?;
    let mut writer = RunWriter::new(&common.out, "analytic sweep", seed, common.workers)?;
    for order in orders {
        let table =
            sequential_limit_sweep(order, theta0, delta, &t_grid, &eps_grid, eta_mode, seed)?;
        let (file, label) = match order {
            LimitOrder::EpsThenT => ("sweep_eps_then_t.csv", "eps then T"),
            LimitOrder::TThenEps => ("sweep_t_then_eps.csv", "T then eps"),
        };
        let corner = table.corner();
        println!(
            "{label}: corner T={} eps={} tail prob {:.3e} (cdf route {:.3e})",
            corner.t, corner.epsilon, corner.prob_paper, corner.prob_oracle
        );
        writer.write(file, &table.to_csv())?;
    }
    writer.finish(&echo)
}
