//! Experiment orchestration: typed configuration, dispatch to the solvers
//! and simulators, acceptance checks and serialization.

mod config;
pub mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use crate::fit::fit_power_law;
pub use config::*;
pub use output::{format_sig, Check, ExperimentResult, Table};

use crate::{Error, Result};

/// Version string recorded in every manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Record of a completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_time_s: f64,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub checks: Vec<Check>,
}

/// Process exit code for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::Extinction { .. } => 4,
        _ => 3,
    }
}

/// Run the configured experiment without touching the filesystem.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let cfg = cfg.resolved()?;
    let seed = cfg.seed;
    match (&cfg.experiment, &cfg.params) {
        (ExperimentId::Volterra, Params::Volterra(p)) => experiments::volterra(p),
        (ExperimentId::StationaryVoid, Params::StationaryVoid(p)) => experiments::stationary_void(p, seed),
        (ExperimentId::AgingVoid, Params::AgingVoid(p)) => experiments::aging_void(p, seed),
        (ExperimentId::PolaronMsd, Params::PolaronMsd(p)) => experiments::polaron_msd(p, seed),
        (ExperimentId::SlowBond, Params::SlowBond(p)) => experiments::slow_bond(p, seed),
        (ExperimentId::GasQss, Params::GasQss(p)) => experiments::gas_qss(p, seed),
        (ExperimentId::Spectra, Params::Spectra(p)) => experiments::spectra(p),
        (ExperimentId::CloningBench, Params::CloningBench(p)) => experiments::cloning_bench(p, seed),
        _ => Err(Error::Config("parameter section does not match the experiment".into())),
    }
}

/// Write `bytes` to `path` through a temporary file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Run the experiment and write its tables, summary and manifest into `out`.
pub fn execute(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    let resolved = cfg.resolved()?;
    let start = Instant::now();
    let result = run_experiment(&resolved)?;
    std::fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    for t in &result.tables {
        let name = format!("{}.csv", t.name);
        write_atomic(&out.join(&name), t.to_csv().as_bytes())?;
        outputs.push(name);
    }
    let summary = serde_json::to_string_pretty(&result.summary).map_err(|e| Error::Io(e.to_string()))?;
    write_atomic(&out.join("summary.json"), summary.as_bytes())?;
    outputs.push("summary.json".into());
    let manifest = RunManifest {
        config: resolved,
        version: VERSION.into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
        checks: result.checks,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    write_atomic(&out.join("manifest.json"), text.as_bytes())?;
    Ok(manifest)
}

/// Default output directory for an experiment.
pub fn default_out_dir(id: ExperimentId) -> PathBuf {
    PathBuf::from("runs").join(id.as_str())
}
