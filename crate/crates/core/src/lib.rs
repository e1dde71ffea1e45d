//! Likelihood-free inference engine with identification diagnostics.
//!
//! The crate has three layers:
//!
//! * simulators and summary statistics for the worked example models
//!   ([`model`], [`lv`], [`summaries`]);
//! * the accept/reject machinery itself ([`abc`], [`distance`], [`kde`]);
//! * tools that decide whether a statistic choice can identify the truth:
//!   analytic binding functions with preimage solving and injectivity
//!   checks ([`binding`]), the statistic-augmentation jump diagnostic and
//!   consistency sweeps ([`diagnostics`]), and the closed-form Gaussian
//!   benchmark with its tail-probability limits ([`gaussian`]).

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod abc;
pub mod binding;
pub mod diagnostics;
pub mod distance;
pub mod error;
pub mod gaussian;
pub mod kde;
pub mod lv;
pub mod model;
pub mod rng;
pub mod series;
pub mod summaries;

pub use abc::{
    concentration_probability, kde_marginal, posterior_summaries, run_kernel_abc,
    run_rejection_abc, select_quantile_tolerance, AbcConfig, AcceptedDraw, Matching, Posterior,
    PosteriorSummary, StatDistance, ToleranceRule,
};
pub use error::{Error, Result};
pub use kde::KdeEstimate;
pub use model::Model;
pub use series::{PlanarSeries, Series, SimOutput};
pub use summaries::{StatisticKind, StatisticSet};
