use abckit::diagnostics::{run_augmentation_sequence, AugmentationPlan, ObservedSource};
use abckit::{AbcConfig, StatisticSet};

use crate::commands::{init_workers, required};
use crate::config::{self, RawAugmentConfig};
use crate::error::{CliError, Result};
use crate::manifest::RunWriter;
use crate::CommonArgs;

pub fn cmd_diagnose_augment(common: &CommonArgs, plan_flag: Option<String>) -> Result<()> {
    init_workers(common.workers)?;
    let mut raw: RawAugmentConfig = match &common.config {
        Some(path) => config::load(path)?,
        None => RawAugmentConfig::default(),
    };
    if plan_flag.is_some() {
        raw.plan = plan_flag;
    }
    let base = match &raw.plan {
        Some(name) => config::augment_plan_preset(name)?,
        None => config::augment_defaults(),
    };
    let mut merged = raw.merged_over(base);
    let seed = config::resolve_seed(common.seed, merged.seed)?;
    merged.seed = Some(seed);

    let model = config::parse_model(&required(merged.model.clone(), "model")?)?;
    let theta0 = required(merged.theta0.clone(), "theta0")?;
    let step_names = required(merged.steps.clone(), "steps")?;
    let steps: Vec<StatisticSet> = step_names
        .iter()
        .map(|n| {
            StatisticSet::by_name(n)
                .map_err(|_| CliError::config(format!("unknown statistic set '{n}'")))
        })
        .collect::<Result<_>>()?;
    let distance =
        config::parse_distance(merged.distance.as_deref().unwrap_or("euclidean"))?;
    let tolerance =
        config::resolve_tolerance(merged.tolerance_quantile, merged.tolerance_absolute)?;
    let plan = AugmentationPlan {
        model,
        source: ObservedSource::Synthetic { theta0 },
        steps,
        distance,
        config: AbcConfig {
            n_draws: required(merged.n_draws, "n_draws")?,
            tolerance,
            seed,
            series_length: required(merged.series_length, "series_length")?,
        },
        threshold: required(merged.threshold, "threshold")?,
    };

    let echo = serde_json::to_value(&merged)
        .map_err(|e| CliError::runtime(format!("config echo: {e}")))?;
    let mut writer = RunWriter::new(&common.out, "diagnose augment", seed, common.workers)?;
    let report = run_augmentation_sequence(&plan)?;
    writer.write("augment.csv", &report.to_csv())?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::runtime(format!("report encode: {e}")))?;
    writer.write("augment.json", &json)?;
    for step in &report.steps {
        let mark = if step.jump.as_ref().map(|j| j.flag).unwrap_or(false) {
            "JUMP"
        } else {
            "ok"
        };
        println!("step {}: {}", step.set_name, mark);
    }
    writer.finish(&echo)
}
