//! Experiment runner for the PF-device PWM neuron models in `pfpwm-core`.
//!
//! [`run`] reads a config file, runs the experiment it names and writes CSV
//! data, JSON results, plot-ready figure files and a `summary.json` into an
//! output directory. Output bytes depend only on the config and the seed.

// NaN must fail config checks, which `!(x > 0.0)` does.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod figures;
pub mod files;
pub mod pool;

use std::path::{Path, PathBuf};

use serde_json::Value;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{Result, RunError};

use files::{object, OutDir};
use pool::Pool;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    /// Overrides the config's `seed`.
    pub seed: Option<u64>,
    /// Defaults to the number of available processors.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub kind: ExperimentKind,
    /// File names written into the output directory, `summary.json` last.
    pub files: Vec<String>,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn run(opts: &RunOptions) -> Result<RunReport> {
    let mut cfg = ExperimentConfig::from_file(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let pool = Pool::new(opts.workers.unwrap_or_else(default_workers))?;
    run_config(&cfg, &pool, &opts.out)
}

/// Runs an already-parsed config.
pub fn run_config(cfg: &ExperimentConfig, pool: &Pool, out_dir: &Path) -> Result<RunReport> {
    let mut out = OutDir::create(out_dir)?;
    let outcome = experiments::run(cfg, pool, &mut out)?;
    let echo = cfg
        .echo
        .iter()
        .map(|(k, v)| (k.clone(), Value::from(v.as_str())))
        .collect();
    let summary = object([
        ("experiment", Value::from(cfg.kind.name())),
        ("seed", Value::from(cfg.seed)),
        ("config", Value::Object(echo)),
        ("derived", outcome.derived),
        ("metrics", outcome.metrics),
        (
            "files",
            Value::Array(
                out.written()
                    .iter()
                    .map(|f| Value::from(f.as_str()))
                    .collect(),
            ),
        ),
    ]);
    out.json("summary.json", &summary)?;
    Ok(RunReport {
        kind: cfg.kind,
        files: out.written().to_vec(),
    })
}
