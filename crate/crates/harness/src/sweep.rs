//! Parameter sweeps over the Cartesian product of axis values.
//!
//! ```toml
//! [base]            # a complete run configuration; base.output_dir is the sweep directory
//! ...
//!
//! [axes]
//! m = [1.1, 1.25, 1.5, 2.0]
//! mu_chi = [[1.0, 1.0], [0.5, 2.0]]   # paired (μ, χ) values; excludes `mu` and `chi`
//! sup_v0 = [1.0]                      # rescales v₀ to this maximum
//! lambda0 = [1.0]
//! resolution = [128]                  # cells per axis
//! seeds = [1, 2]                      # replicates per point
//! ```
//!
//! Omitted axes keep the base value. Every point runs independently in its own directory
//! `points/pNNNN`; the aggregated table is sorted by `(m, mu, chi, seed)` and then by the
//! remaining axes, so it does not depend on completion order.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use chemotaxis_core::Verdict;
use serde::{Deserialize, Serialize};

use crate::config::{self, RunConfig};
use crate::error::{HarnessError, Result};
use crate::experiment;
use crate::initial;
use crate::output::fmt_f64;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default)]
    pub m: Option<Vec<f64>>,
    #[serde(default)]
    pub mu: Option<Vec<f64>>,
    #[serde(default)]
    pub chi: Option<Vec<f64>>,
    #[serde(default)]
    pub mu_chi: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub sup_v0: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda0: Option<Vec<f64>>,
    #[serde(default)]
    pub resolution: Option<Vec<usize>>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: RunConfig,
    #[serde(default)]
    pub axes: Axes,
}

/// One point of the product, with its replicate seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub config: RunConfig,
    /// Target `sup v₀`, when the axis is swept.
    pub sup_v0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: f64,
    pub mu: f64,
    pub chi: f64,
    pub sup_v0: f64,
    pub lambda0: f64,
    pub resolution: usize,
    pub seed: u64,
    pub threshold_m: f64,
    pub margin: f64,
    pub verdict: String,
    pub peak_sup_u: f64,
    pub entropy_peak: f64,
    pub status: String,
}

pub const SWEEP_COLUMNS: [&str; 13] = [
    "m",
    "mu",
    "chi",
    "sup_v0",
    "lambda0",
    "resolution",
    "seed",
    "threshold_m",
    "margin",
    "verdict",
    "peak_sup_u",
    "entropy_peak",
    "status",
];

/// A Bounded verdict at some `m` followed by a non-Bounded one at a larger `m`, with everything
/// else fixed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityFinding {
    pub mu: f64,
    pub chi: f64,
    pub sup_v0: f64,
    pub lambda0: f64,
    pub resolution: usize,
    pub seed: u64,
    pub bounded_at_m: f64,
    pub not_bounded_at_m: f64,
    pub verdict: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub points: usize,
    pub bounded: usize,
    pub growing: usize,
    pub inconclusive: usize,
    pub failed: usize,
    pub monotonicity_findings: Vec<MonotonicityFinding>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
    pub output_dir: PathBuf,
}

pub const SWEEP_FILE: &str = "sweep.csv";
pub const SUMMARY_FILE: &str = "sweep_summary.json";

fn nonempty<T>(name: &str, v: &Option<Vec<T>>) -> Result<()> {
    match v {
        Some(v) if v.is_empty() => Err(HarnessError::Invalid(format!(
            "axis `axes.{name}` must not be empty"
        ))),
        _ => Ok(()),
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let a = &self.axes;
        nonempty("m", &a.m)?;
        nonempty("mu", &a.mu)?;
        nonempty("chi", &a.chi)?;
        nonempty("mu_chi", &a.mu_chi)?;
        nonempty("sup_v0", &a.sup_v0)?;
        nonempty("lambda0", &a.lambda0)?;
        nonempty("resolution", &a.resolution)?;
        nonempty("seeds", &a.seeds)?;
        if a.mu_chi.is_some() && (a.mu.is_some() || a.chi.is_some()) {
            return Err(HarnessError::Invalid(
                "`axes.mu_chi` cannot be combined with `axes.mu` or `axes.chi`".into(),
            ));
        }
        if let Some(s) = &a.sup_v0 {
            if s.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(HarnessError::Invalid(
                    "`axes.sup_v0` values must be nonnegative".into(),
                ));
            }
        }
        for p in self.points()? {
            p.config.validate()?;
        }
        Ok(())
    }

    /// Number of runs the sweep will execute.
    pub fn size(&self) -> usize {
        let a = &self.axes;
        let len = |o: Option<usize>| o.unwrap_or(1);
        let pairs = match &a.mu_chi {
            Some(p) => p.len(),
            None => len(a.mu.as_ref().map(Vec::len)) * len(a.chi.as_ref().map(Vec::len)),
        };
        len(a.m.as_ref().map(Vec::len))
            * pairs
            * len(a.sup_v0.as_ref().map(Vec::len))
            * len(a.lambda0.as_ref().map(Vec::len))
            * len(a.resolution.as_ref().map(Vec::len))
            * len(a.seeds.as_ref().map(Vec::len))
    }

    /// Expands the product in axis order `m, (μ, χ), sup_v0, λ₀, resolution, seed`.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let base = &self.base;
        let a = &self.axes;
        let ms = a.m.clone().unwrap_or_else(|| vec![base.params.m]);
        let pairs: Vec<(f64, f64)> = match &a.mu_chi {
            Some(p) => p.iter().map(|[mu, chi]| (*mu, *chi)).collect(),
            None => {
                let mus = a.mu.clone().unwrap_or_else(|| vec![base.params.mu]);
                let chis = a.chi.clone().unwrap_or_else(|| vec![base.params.chi]);
                mus.iter()
                    .flat_map(|mu| chis.iter().map(move |chi| (*mu, *chi)))
                    .collect()
            }
        };
        let sups: Vec<Option<f64>> = match &a.sup_v0 {
            Some(s) => s.iter().map(|x| Some(*x)).collect(),
            None => vec![None],
        };
        let lambdas = a.lambda0.clone().unwrap_or_else(|| vec![base.params.lambda0]);
        let resolutions: Vec<Option<usize>> = match &a.resolution {
            Some(r) => r.iter().map(|x| Some(*x)).collect(),
            None => vec![None],
        };
        let seeds = a.seeds.clone().unwrap_or_else(|| vec![base.seed]);

        let mut points = Vec::new();
        for &m in &ms {
            for &(mu, chi) in &pairs {
                for &sup in &sups {
                    for &lambda0 in &lambdas {
                        for &res in &resolutions {
                            for &seed in &seeds {
                                let mut cfg = base.clone();
                                cfg.params.m = m;
                                cfg.params.mu = mu;
                                cfg.params.chi = chi;
                                cfg.params.lambda0 = lambda0;
                                if let Some(n) = res {
                                    cfg.grid.cells = vec![n; cfg.grid.cells.len()];
                                }
                                cfg.seed = seed;
                                let index = points.len();
                                cfg.output_dir = base.output_dir.join(format!("points/p{index:04}"));
                                points.push(SweepPoint {
                                    index,
                                    config: cfg,
                                    sup_v0: sup,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(points)
    }
}

pub fn parse_sweep(text: &str, origin: &str) -> Result<SweepSpec> {
    let spec: SweepSpec = config::parse_toml(text, origin)?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_sweep(&text, &path.display().to_string())
}

fn run_point(point: &SweepPoint, root: &Path) -> SweepRow {
    let cfg = &point.config;
    let p = &cfg.params;
    let mut row = SweepRow {
        m: p.m,
        mu: p.mu,
        chi: p.chi,
        sup_v0: point.sup_v0.unwrap_or(f64::NAN),
        lambda0: p.lambda0,
        resolution: cfg.grid.cells[0],
        seed: cfg.seed,
        threshold_m: f64::NAN,
        margin: f64::NAN,
        verdict: Verdict::Inconclusive.to_string(),
        peak_sup_u: f64::NAN,
        entropy_peak: f64::NAN,
        status: String::new(),
    };
    let result = (|| -> Result<experiment::Simulation> {
        let spec = cfg.spec()?;
        let mut state = initial::make_initial(&cfg.initial, spec, cfg.seed)?;
        if let Some(s) = point.sup_v0 {
            state = initial::with_sup_v0(state, s)?;
        }
        let sim = experiment::simulate_from(cfg, state)?;
        experiment::persist(cfg, &sim, &cfg.resolve_output_dir(root))?;
        Ok(sim)
    })();
    match result {
        Ok(sim) => {
            row.sup_v0 = sim.sup_v0;
            row.threshold_m = sim.threshold_m;
            row.margin = sim.margin;
            row.verdict = sim.outcome.verdict.to_string();
            row.peak_sup_u = sim.outcome.peak_sup_u;
            row.entropy_peak = sim.outcome.entropy_peak;
            row.status = sim.trajectory.status.to_string();
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

fn row_order(a: &SweepRow, b: &SweepRow) -> Ordering {
    a.m.total_cmp(&b.m)
        .then(a.mu.total_cmp(&b.mu))
        .then(a.chi.total_cmp(&b.chi))
        .then(a.seed.cmp(&b.seed))
        .then(a.sup_v0.total_cmp(&b.sup_v0))
        .then(a.lambda0.total_cmp(&b.lambda0))
        .then(a.resolution.cmp(&b.resolution))
}

/// Flags every place where the Bounded region fails to be upward-closed in `m`.
pub fn monotonicity_audit(rows: &[SweepRow]) -> Vec<MonotonicityFinding> {
    let mut groups: Vec<Vec<&SweepRow>> = Vec::new();
    for r in rows {
        let same = |g: &Vec<&SweepRow>| {
            let h = g[0];
            h.mu == r.mu
                && h.chi == r.chi
                && h.sup_v0.total_cmp(&r.sup_v0) == Ordering::Equal
                && h.lambda0 == r.lambda0
                && h.resolution == r.resolution
                && h.seed == r.seed
        };
        match groups.iter_mut().find(|g| same(g)) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    let bounded = Verdict::Bounded.to_string();
    let mut findings = Vec::new();
    for mut g in groups {
        g.sort_by(|a, b| a.m.total_cmp(&b.m));
        let mut lowest_bounded: Option<f64> = None;
        for r in g {
            if r.verdict == bounded {
                lowest_bounded.get_or_insert(r.m);
            } else if let Some(mb) = lowest_bounded {
                findings.push(MonotonicityFinding {
                    mu: r.mu,
                    chi: r.chi,
                    sup_v0: r.sup_v0,
                    lambda0: r.lambda0,
                    resolution: r.resolution,
                    seed: r.seed,
                    bounded_at_m: mb,
                    not_bounded_at_m: r.m,
                    verdict: r.verdict.clone(),
                });
            }
        }
    }
    findings
}

pub fn summarize(rows: &[SweepRow]) -> SweepSummary {
    let count = |v: Verdict| rows.iter().filter(|r| r.verdict == v.to_string()).count();
    SweepSummary {
        points: rows.len(),
        bounded: count(Verdict::Bounded),
        growing: count(Verdict::Growing),
        inconclusive: count(Verdict::Inconclusive),
        failed: rows.iter().filter(|r| r.status.starts_with("error")).count(),
        monotonicity_findings: monotonicity_audit(rows),
    }
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let err = |e| HarnessError::csv(path, e);
    w.write_record(SWEEP_COLUMNS).map_err(err)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.m),
            fmt_f64(r.mu),
            fmt_f64(r.chi),
            fmt_f64(r.sup_v0),
            fmt_f64(r.lambda0),
            r.resolution.to_string(),
            r.seed.to_string(),
            fmt_f64(r.threshold_m),
            fmt_f64(r.margin),
            r.verdict.clone(),
            fmt_f64(r.peak_sup_u),
            fmt_f64(r.entropy_peak),
            r.status.clone(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[cfg(feature = "parallel")]
fn execute(points: &[SweepPoint], jobs: usize, root: &Path) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    if jobs <= 1 {
        return Ok(points.iter().map(|p| run_point(p, root)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Invalid(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(|| points.par_iter().map(|p| run_point(p, root)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn execute(points: &[SweepPoint], _jobs: usize, root: &Path) -> Result<Vec<SweepRow>> {
    Ok(points.iter().map(|p| run_point(p, root)).collect())
}

/// Runs every point (up to `jobs` at once), then writes `sweep.csv` and `sweep_summary.json`
/// into the base output directory. Failed points are recorded in their row.
pub fn run_sweep(spec: &SweepSpec, jobs: usize, root: &Path) -> Result<SweepResult> {
    spec.validate()?;
    let points = spec.points()?;
    let mut rows = execute(&points, jobs.max(1), root)?;
    rows.sort_by(row_order);
    let summary = summarize(&rows);
    let output_dir = spec.base.resolve_output_dir(root);
    write_sweep_csv(&output_dir.join(SWEEP_FILE), &rows)?;
    crate::output::write_json(&output_dir.join(SUMMARY_FILE), &summary)?;
    Ok(SweepResult {
        rows,
        summary,
        output_dir,
    })
}
