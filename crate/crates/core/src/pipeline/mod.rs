//! Experiment orchestration: configuration, the four named experiments
//! (estimate decay, boundary identity, reconstruction, localization),
//! deterministic reporting, and run manifests.

pub mod config;
mod experiments;

pub use config::{Config, WindowKind};
pub use experiments::{
    run_estimates, run_identity, run_localize, run_reconstruct, EstimatesOutput, IdentityOutput,
    IdentityRow, LocalizeOutput, PairOutcome, Phantom, ReconstructOutput,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::Result;

/// Runtime context shared by all experiments.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub workers: usize,
    pub seed: u64,
}

impl RunContext {
    pub fn new(out_dir: impl Into<PathBuf>, workers: usize, seed: u64) -> Self {
        RunContext { out_dir: out_dir.into(), workers, seed }
    }

    /// Runs `f` inside a rayon pool with the configured worker count
    /// (0 = library default). Results are collected in job order, so the
    /// output bytes do not depend on the worker count.
    pub(crate) fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        if self.workers == 0 {
            return Ok(f());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| crate::Error::Config(format!("worker pool: {e}")))?;
        Ok(pool.install(f))
    }

    pub(crate) fn table_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Summary of one experiment run; serialized as the run manifest.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub config_hash: String,
    pub crate_version: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_seconds: f64,
    pub tables: Vec<String>,
    pub summary: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<String>,
    /// Jobs that failed (message per job); nonempty marks the run
    /// incomplete.
    pub failed_jobs: Vec<String>,
    pub ok: bool,
}

impl RunReport {
    /// Public constructor for tooling that assembles its own runs.
    pub fn for_experiment(experiment: &str, cfg: &Config, ctx: &RunContext) -> Self {
        Self::new(experiment, cfg, ctx)
    }

    pub(crate) fn new(experiment: &str, cfg: &Config, ctx: &RunContext) -> Self {
        RunReport {
            experiment: experiment.to_string(),
            config_hash: cfg.hash(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: ctx.seed,
            workers: ctx.workers,
            wall_seconds: 0.0,
            tables: Vec::new(),
            summary: BTreeMap::new(),
            warnings: Vec::new(),
            failed_jobs: Vec::new(),
            ok: true,
        }
    }

    pub(crate) fn put(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    /// Writes `manifest_<experiment>.json` into the output directory.
    pub fn write_manifest(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(format!("manifest_{}.json", self.experiment));
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| crate::Error::Format(e.to_string()))?;
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
