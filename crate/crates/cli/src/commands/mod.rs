pub mod abc_run;
pub mod augment;
pub mod injectivity;
pub mod lv_study;
pub mod sweep;

use crate::error::{CliError, Result};

/// Install the global worker pool before any parallel work. Output never
/// depends on the pool size; only wall time does.
pub fn init_workers(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::config("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::runtime(format!("worker pool: {e}")))?;
    }
    Ok(())
}

pub fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| CliError::config(format!("missing config key `{key}`")))
}
