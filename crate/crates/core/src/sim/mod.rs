//! Monte Carlo driver: runs drops in parallel, pools their records and
//! writes result files.

pub mod config;
pub mod output;
pub mod pipeline;
pub mod stats;

pub use config::{ConfigError, Overrides, SimConfig};
pub use output::{emit_outputs, emit_sweep};
pub use pipeline::{
    build_routes, drop_rng, mix64, prepare_drop, run_drop, DropError, DropStats, EntityKind, EntityRecord,
    PreparedDrop, RoutePlan,
};
pub use stats::{aggregate, AggregateStats, ClassStats};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::powerctl::PcScheme;

/// Environment variable that sets the number of worker threads.
pub const WORKERS_ENV: &str = "D2DSIM_WORKERS";

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("all {drops} drops failed; first error: {first}")]
    AllDropsFailed { drops: usize, first: String },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error("invalid {WORKERS_ENV}: {0:?}")]
    Workers(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropFailure {
    pub drop_index: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: SimConfig,
    pub stats: AggregateStats,
    pub failures: Vec<DropFailure>,
}

/// Worker count from [`WORKERS_ENV`]; `None` when unset.
pub fn workers_from_env() -> Result<Option<usize>, SimError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(SimError::Workers(v)),
        },
    }
}

/// Runs all drops on `workers` threads (rayon's default when `None`).
/// Results come back in drop order whatever the thread count.
pub fn run_drops(config: &SimConfig, workers: Option<usize>) -> Result<Vec<Result<DropStats, DropError>>, SimError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| SimError::Pool(e.to_string()))?;
    Ok(pool.install(|| (0..config.drops).into_par_iter().map(|i| run_drop(config, i)).collect()))
}

/// Runs and aggregates one configuration. Failed drops are left out of the
/// statistics and listed in the report; it is an error only if every drop
/// fails.
pub fn simulate(config: &SimConfig, workers: Option<usize>) -> Result<RunReport, SimError> {
    config.validate()?;
    let mut ok = Vec::with_capacity(config.drops);
    let mut failures = Vec::new();
    for (drop_index, r) in run_drops(config, workers)?.into_iter().enumerate() {
        match r {
            Ok(d) => ok.push(d),
            Err(e) => failures.push(DropFailure { drop_index, message: e.to_string() }),
        }
    }
    if ok.is_empty() {
        return Err(SimError::AllDropsFailed { drops: config.drops, first: failures[0].message.clone() });
    }
    let stats = aggregate(&ok, failures.len());
    Ok(RunReport { config: config.clone(), stats, failures })
}

/// Configurations of a sweep: utility maximization at every `omega`, then
/// the fixed, fixed-SNR, open-loop and closed-loop baselines.
pub fn sweep_configs(base: &SimConfig, omegas: &[f64]) -> Vec<SimConfig> {
    let um = omegas.iter().map(|&omega| SimConfig { power_control: PcScheme::Um, omega, ..base.clone() });
    let baselines = [PcScheme::Fix, PcScheme::FixSnr, PcScheme::Ol, PcScheme::Cl]
        .into_iter()
        .map(|power_control| SimConfig { power_control, ..base.clone() });
    um.chain(baselines).collect()
}

pub fn sweep(base: &SimConfig, omegas: &[f64], workers: Option<usize>) -> Result<Vec<RunReport>, SimError> {
    sweep_configs(base, omegas).iter().map(|c| simulate(c, workers)).collect()
}
