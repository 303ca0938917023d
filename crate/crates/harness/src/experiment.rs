//! Single runs: simulation, classification, entropy audit and persistence.

use std::path::{Path, PathBuf};

use chemotaxis_core::diagnostics::{self, GronwallReport};
use chemotaxis_core::stepper::{self, RunStatus, Trajectory};
use chemotaxis_core::{RunOutcome, State};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::initial;
use crate::output;

/// A finished simulation with its derived quantities.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub initial: State,
    pub trajectory: Trajectory,
    pub outcome: RunOutcome,
    pub sup_v0: f64,
    pub threshold_m: f64,
    /// `m − threshold_m`.
    pub margin: f64,
    /// Entropy audit; absent when `μ = 0`.
    pub entropy_audit: Option<GronwallReport>,
}

/// Runs the configured simulation from its generated initial data.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let state = initial::make_initial(&cfg.initial, spec, cfg.seed)?;
    simulate_from(cfg, state)
}

/// Runs the configuration from explicit initial data.
pub fn simulate_from(cfg: &RunConfig, initial: State) -> Result<Simulation> {
    let trajectory = stepper::run(&initial, &cfg.params, &cfg.solver, &cfg.diag, &mut [])?;
    let outcome = diagnostics::classify_run(
        &trajectory.diag,
        trajectory.status,
        cfg.solver.t_end,
        &cfg.diag,
    );
    let spec = *initial.spec();
    let sup_v0 = initial.v.max();
    let threshold_m = cfg.params.threshold(sup_v0, spec.dim());
    let entropy_audit = if cfg.params.mu > 0.0 && trajectory.diag.len() >= 2 {
        Some(diagnostics::audit_entropy(
            &trajectory.diag,
            &cfg.params,
            spec.domain_volume(),
        )?)
    } else {
        None
    };
    Ok(Simulation {
        initial,
        trajectory,
        outcome,
        sup_v0,
        threshold_m,
        margin: cfg.params.m - threshold_m,
        entropy_audit,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StatsRecord {
    pub accepted: usize,
    pub rejected: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub last_rejection: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileList {
    pub series: String,
    pub windows: String,
    pub snapshots: Vec<String>,
}

/// Everything needed to reproduce and interpret a run.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub code_version: String,
    pub config: RunConfig,
    pub status: RunStatus,
    pub outcome: RunOutcome,
    pub sup_v0: f64,
    pub threshold_m: f64,
    pub margin: f64,
    pub stats: StatsRecord,
    pub entropy_audit: Option<GronwallReport>,
    pub files: FileList,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub simulation: Simulation,
    pub output_dir: PathBuf,
    pub manifest: Manifest,
}

pub const SERIES_FILE: &str = "series.csv";
pub const WINDOWS_FILE: &str = "windows.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `series.csv`, `windows.csv`, `snapshots/snap_NNNNN.bin` and `manifest.json` into
/// `dir`.
pub fn persist(cfg: &RunConfig, sim: &Simulation, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    output::write_series_csv(&dir.join(SERIES_FILE), &sim.trajectory.diag)?;
    output::write_windows_csv(&dir.join(WINDOWS_FILE), &sim.trajectory.diag)?;
    let mut snapshots = Vec::new();
    for (k, s) in sim.trajectory.snapshots.iter().enumerate() {
        let name = format!("snapshots/snap_{k:05}.bin");
        output::write_snapshot(&dir.join(&name), s)?;
        snapshots.push(name);
    }
    let stats = &sim.trajectory.stats;
    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        status: sim.trajectory.status,
        outcome: sim.outcome.clone(),
        sup_v0: sim.sup_v0,
        threshold_m: sim.threshold_m,
        margin: sim.margin,
        stats: StatsRecord {
            accepted: stats.accepted,
            rejected: stats.rejected,
            dt_min: stats.dt_min,
            dt_max: stats.dt_max,
            last_rejection: stats.last_rejection.clone(),
        },
        entropy_audit: sim.entropy_audit.clone(),
        files: FileList {
            series: SERIES_FILE.to_string(),
            windows: WINDOWS_FILE.to_string(),
            snapshots,
        },
    };
    output::write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Simulates `cfg` and persists the results under its output directory (resolved against
/// `root`). Growing or inconclusive verdicts are results, not errors.
pub fn run_experiment(cfg: &RunConfig, root: &Path) -> Result<ExperimentReport> {
    let simulation = simulate(cfg)?;
    let output_dir = cfg.resolve_output_dir(root);
    let manifest = persist(cfg, &simulation, &output_dir)?;
    Ok(ExperimentReport {
        simulation,
        output_dir,
        manifest,
    })
}
