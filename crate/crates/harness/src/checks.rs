//! Reference checks exposed by the `oracle-check` and `mms` subcommands.

use chemotaxis_core::oracle::{self, MmsCase, MmsLevel};
use chemotaxis_core::stepper::{self, RunStatus, StepObserver};
use chemotaxis_core::{DiagConfig, Field, GridSpec, ModelParams, SolverConfig, State};
use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Initial densities of the homogeneous checks.
pub const HOMOGENEOUS_U0: [f64; 4] = [0.0, 0.5, 1.0, 2.0];
/// Maximum error allowed per unit step length.
pub const HOMOGENEOUS_ERROR_PER_DT: f64 = 5.0;
/// Minimum observed temporal order when the step is halved.
pub const MIN_TEMPORAL_ORDER: f64 = 0.9;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Largest deviation from the spatially constant closed-form solution over accepted steps.
struct HomogeneousError {
    u0: f64,
    v0: f64,
    mu: f64,
    max_err: f64,
    failure: Option<String>,
}

impl StepObserver for HomogeneousError {
    fn on_accept(&mut self, _prev: &State, next: &State, _dt: f64) {
        match oracle::homogeneous_solution(self.u0, self.v0, self.mu, next.t) {
            Ok((u, v)) => {
                let eu = next.u.values().iter().map(|x| (x - u).abs()).fold(0.0, f64::max);
                let ev = next.v.values().iter().map(|x| (x - v).abs()).fold(0.0, f64::max);
                self.max_err = self.max_err.max(eu).max(ev);
            }
            Err(e) => self.failure = Some(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HomogeneousCheck {
    pub u0: f64,
    pub v0: f64,
    pub mu: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Max error over the horizon with step `dt`.
    pub max_err: f64,
    /// Same with step `dt / 2`.
    pub max_err_half: f64,
    /// `log2(max_err / max_err_half)`; absent when the error vanishes to rounding.
    pub order: Option<f64>,
}

impl HomogeneousCheck {
    pub fn passed(&self) -> bool {
        self.max_err <= HOMOGENEOUS_ERROR_PER_DT * self.dt
            && self.order.is_none_or(|p| p >= MIN_TEMPORAL_ORDER)
    }
}

fn homogeneous_error(u0: f64, v0: f64, params: &ModelParams, dt: f64, t_end: f64) -> Result<f64> {
    let spec = GridSpec::uniform(2, 3, 1.0)?;
    let initial = State::new(Field::constant(spec, u0), Field::constant(spec, v0), 0.0)?;
    let cfg = SolverConfig {
        dt_init: dt,
        dt_max: dt,
        snapshot_every: t_end,
        linear_tol: 1e-13,
        ..SolverConfig::with_t_end(t_end)
    };
    let mut obs = HomogeneousError {
        u0,
        v0,
        mu: params.mu,
        max_err: 0.0,
        failure: None,
    };
    let traj = stepper::run(&initial, params, &cfg, &DiagConfig::default(), &mut [&mut obs])?;
    if traj.status != RunStatus::Completed {
        return Err(HarnessError::Solver(format!("homogeneous run ended with {}", traj.status)));
    }
    if let Some(f) = obs.failure {
        return Err(HarnessError::Invalid(f));
    }
    Ok(obs.max_err)
}

/// Runs spatially constant data with step `dt` and `dt / 2` against the closed-form solution.
pub fn homogeneous_check(u0: f64, v0: f64, mu: f64, dt: f64, t_end: f64) -> Result<HomogeneousCheck> {
    let params = ModelParams::new(1.0, mu, 1.5)?;
    let max_err = homogeneous_error(u0, v0, &params, dt, t_end)?;
    let max_err_half = homogeneous_error(u0, v0, &params, 0.5 * dt, t_end)?;
    let order = (max_err > 1e-13).then(|| (max_err / max_err_half).log2());
    Ok(HomogeneousCheck {
        u0,
        v0,
        mu,
        dt,
        t_end,
        max_err,
        max_err_half,
        order,
    })
}

/// A refined reference run with factor 1 must coincide bit for bit with the plain run.
pub fn refinement_identity_check() -> Result<bool> {
    let spec = GridSpec::new(&[12, 9], &[1.0, 0.75])?;
    let u = Field::from_fn(spec, |x| 1.0 + 4.0 * (-((x[0] - 0.4).powi(2) + (x[1] - 0.3).powi(2)) / 0.02).exp())?;
    let v = Field::from_fn(spec, |x| 0.5 + 0.4 * (3.0 * x[0]).cos() * (4.0 * x[1]).sin())?;
    let initial = State::new(u, v, 0.0)?;
    let params = ModelParams::new(1.0, 1.0, 1.5)?;
    let cfg = SolverConfig {
        snapshot_every: 0.25,
        ..SolverConfig::with_t_end(1.0)
    };
    let diag = DiagConfig::default();
    let plain = stepper::run(&initial, &params, &cfg, &diag, &mut [])?;
    let refined = oracle::reference_run(&initial, &params, &cfg, &diag, 1, &mut [])?;
    let bits = |s: &[State]| -> Vec<u64> {
        s.iter()
            .flat_map(|s| s.u.values().iter().chain(s.v.values()).map(|x| x.to_bits()))
            .collect()
    };
    Ok(bits(&plain.snapshots) == bits(&refined.snapshots))
}

pub const ORACLE_CASES: [&str; 5] = [
    "homogeneous-0",
    "homogeneous-0.5",
    "homogeneous-1",
    "homogeneous-2",
    "refinement-identity",
];

/// Runs one named oracle case, or all of them.
pub fn oracle_check(case: Option<&str>) -> Result<Vec<CheckResult>> {
    let names: Vec<&str> = match case {
        Some(c) if ORACLE_CASES.contains(&c) => vec![c],
        Some(c) => {
            return Err(HarnessError::Invalid(format!(
                "unknown oracle case `{c}` (expected one of {})",
                ORACLE_CASES.join(", ")
            )))
        }
        None => ORACLE_CASES.to_vec(),
    };
    let mut out = Vec::new();
    for name in names {
        let result = if let Some(u0) = name.strip_prefix("homogeneous-") {
            let u0: f64 = u0.parse().expect("case names carry valid numbers");
            let c = homogeneous_check(u0, 1.0, 1.0, 0.01, 5.0)?;
            CheckResult {
                name: name.to_string(),
                passed: c.passed(),
                detail: format!(
                    "max error {:.3e} (dt = {}), {:.3e} (dt = {}), order {}",
                    c.max_err,
                    c.dt,
                    c.max_err_half,
                    0.5 * c.dt,
                    c.order.map_or("n/a (exact)".to_string(), |p| format!("{p:.3}"))
                ),
            }
        } else {
            let same = refinement_identity_check()?;
            CheckResult {
                name: name.to_string(),
                passed: same,
                detail: if same {
                    "bitwise identical snapshots".into()
                } else {
                    "snapshots differ".into()
                },
            }
        };
        out.push(result);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct MmsReport {
    pub case: String,
    pub chi: f64,
    pub m: f64,
    pub t_end: f64,
    pub levels: Vec<MmsRow>,
    pub order_u: Vec<f64>,
    pub order_v: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MmsRow {
    pub cells: usize,
    pub h: f64,
    pub dt: f64,
    pub err_u: f64,
    pub err_v: f64,
}

impl From<MmsLevel> for MmsRow {
    fn from(l: MmsLevel) -> Self {
        MmsRow {
            cells: l.cells,
            h: l.h,
            dt: l.dt,
            err_u: l.err_u,
            err_v: l.err_v,
        }
    }
}

/// Step-to-mesh ratio `dt / h²` of the convergence studies.
pub const MMS_DT_FACTOR: f64 = 0.5;

/// Default horizon: long enough for transport to matter, short enough for fine 2D levels.
pub fn default_mms_t_end(case: MmsCase) -> f64 {
    if case.dim() == 1 {
        0.25
    } else {
        0.05
    }
}

/// Convergence table on `levels` successive halvings starting from `coarsest` cells per axis.
pub fn mms_table(case: MmsCase, chi: f64, m: f64, coarsest: usize, levels: usize, t_end: f64) -> Result<MmsReport> {
    if levels < 2 {
        return Err(HarnessError::Invalid("`levels` must be at least 2".into()));
    }
    let params = ModelParams::new(chi, 1.0, m)?;
    let cells: Vec<usize> = (0..levels).map(|k| coarsest << k).collect();
    let table = oracle::mms_study(case, &params, &cells, t_end, MMS_DT_FACTOR)?;
    let err_u: Vec<f64> = table.iter().map(|l| l.err_u).collect();
    let err_v: Vec<f64> = table.iter().map(|l| l.err_v).collect();
    Ok(MmsReport {
        case: case.name().to_string(),
        chi,
        m,
        t_end,
        order_u: oracle::observed_orders(&err_u),
        order_v: oracle::observed_orders(&err_v),
        levels: table.into_iter().map(MmsRow::from).collect(),
    })
}
