//! Positivity-preserving IMEX time stepping.
//!
//! One step of length `dt` from `(uⁿ, vⁿ)`:
//!
//! 1. `(I − dt Δ + dt diag(uⁿ)) vⁿ⁺¹ = vⁿ`, an M-matrix solve;
//! 2. `(1 + dt μ uⁿ) uⁿ⁺¹ − dt ∇·(D(uⁿ)∇uⁿ⁺¹) = (1 + dt μ) uⁿ − dt ∇·F`, where `F` is the
//!    upwind flux of `uⁿ` in the face velocity `χ∇vⁿ⁺¹`.
//!
//! The right-hand side of (2) is nonnegative under the advective step limit, and both matrices
//! are M-matrices, so the exact discrete solutions are nonnegative and `vⁿ⁺¹ ≤ max vⁿ`. The
//! iterative solutions are projected onto those bounds and `uⁿ⁺¹` is rescaled so that the
//! discrete mass law `Σuⁿ⁺¹ + dt μ Σuⁿuⁿ⁺¹ = (1 + dt μ) Σuⁿ` holds to rounding.

mod cg;
mod mg;

pub use cg::{solve_spd, FaceOperator, Identity, LinearOperator, SolveReport};
pub use mg::{Multigrid, Preconditioner};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagConfig, DiagSeries};
use crate::error::{Error, Result};
use crate::grid::{self, FaceField, Field, GridSpec};
use crate::model::{self, ModelParams, State};
use crate::par;

/// Step rejections allowed before a run gives up.
pub const MAX_HALVINGS: usize = 20;

fn default_dt_init() -> f64 {
    1e-3
}
fn default_dt_max() -> f64 {
    1e-2
}
fn default_cfl() -> f64 {
    0.5
}
fn default_snapshot_every() -> f64 {
    1.0
}
fn default_max_linear_iters() -> usize {
    5000
}
fn default_linear_tol() -> f64 {
    1e-10
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_dt_init")]
    pub dt_init: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    pub t_end: f64,
    /// Simulation-time spacing of stored snapshots.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: f64,
    #[serde(default = "default_max_linear_iters")]
    pub max_linear_iters: usize,
    #[serde(default = "default_linear_tol")]
    pub linear_tol: f64,
    #[serde(default)]
    pub positivity_tol: f64,
}

impl SolverConfig {
    pub fn with_t_end(t_end: f64) -> Self {
        SolverConfig {
            dt_init: default_dt_init(),
            dt_max: default_dt_max(),
            cfl_safety: default_cfl(),
            t_end,
            snapshot_every: default_snapshot_every(),
            max_linear_iters: default_max_linear_iters(),
            linear_tol: default_linear_tol(),
            positivity_tol: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt_init", self.dt_init),
            ("dt_max", self.dt_max),
            ("t_end", self.t_end),
            ("snapshot_every", self.snapshot_every),
            ("linear_tol", self.linear_tol),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::param(name, format!("must be positive and finite (got {x})")));
            }
        }
        if self.dt_init > self.dt_max {
            return Err(Error::param("dt_init", "must not exceed dt_max"));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::param("cfl_safety", "must lie in (0, 1]"));
        }
        if !(self.positivity_tol.is_finite() && self.positivity_tol >= 0.0) {
            return Err(Error::param("positivity_tol", "must be nonnegative"));
        }
        if self.max_linear_iters == 0 {
            return Err(Error::param("max_linear_iters", "must be at least 1"));
        }
        Ok(())
    }
}

/// Space-time forcing added to both equations (manufactured solutions).
pub trait Source: Sync {
    /// Cell-centred `(f_u, f_v)` at time `t`.
    fn sample(&self, spec: &GridSpec, t: f64) -> (Field, Field);
}

fn project(x: &mut [f64], lo: f64, hi: f64) {
    par::update(x, |_, v| v.clamp(lo, hi));
}

fn first_below(x: &[f64], floor: f64) -> Option<usize> {
    x.iter().position(|v| *v < floor)
}

/// Advances `state` by `dt`. Fails on a stalled linear solve or when a value would drop below
/// `−positivity_tol`; the caller is expected to retry with a smaller step.
pub fn step(state: &State, dt: f64, params: &ModelParams, cfg: &SolverConfig) -> Result<State> {
    step_with_source(state, dt, params, cfg, None)
}

pub fn step_with_source(
    state: &State,
    dt: f64,
    params: &ModelParams,
    cfg: &SolverConfig,
    source: Option<&dyn Source>,
) -> Result<State> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive (got {dt})")));
    }
    let spec = *state.spec();
    let un = state.u.values();
    let vn = state.v.values();
    let forcing = source.map(|s| s.sample(&spec, state.t + dt));
    let neg_floor = -cfg.positivity_tol;

    // chemoattractant: implicit diffusion and consumption
    let mut diag = vec![0.0; spec.len()];
    par::fill(&mut diag, |i| 1.0 + dt * un[i]);
    let op_v = FaceOperator::shifted_laplacian(diag, dt, spec)?;
    let mut b = vn.to_vec();
    if let Some((_, fv)) = &forcing {
        let fv = fv.values();
        par::update(&mut b, |i, bi| bi + dt * fv[i]);
    }
    let b_v = Field::new(spec, b)?;
    let (v_next, _) = solve_spd(
        &op_v,
        &b_v,
        Some(&state.v),
        cfg.linear_tol,
        cfg.max_linear_iters,
    )?;
    let mut v_next = v_next.into_values();
    if forcing.is_none() {
        project(&mut v_next, 0.0, state.v.max());
    } else if b_v.min() >= 0.0 {
        project(&mut v_next, 0.0, f64::INFINITY);
    }
    if let Some(cell) = first_below(&v_next, neg_floor) {
        return Err(Error::Negative {
            field: "v",
            cell,
            value: v_next[cell],
        });
    }
    let v_next = Field::new(spec, v_next)?;

    // cell density: explicit upwind transport and logistic growth, implicit diffusion and decay
    let velocity = model::chemotactic_velocity(&v_next, params.chi);
    let transport = grid::div_faces(&model::upwind_flux(&state.u, &velocity));
    let tr = transport.values();
    let mu = params.mu;
    let mut b = vec![0.0; spec.len()];
    par::fill(&mut b, |i| un[i] * (1.0 + dt * mu) - dt * tr[i]);
    let mut forced_mass = 0.0;
    if let Some((fu, _)) = &forcing {
        let fu = fu.values();
        par::update(&mut b, |i, bi| bi + dt * fu[i]);
        forced_mass = dt * par::sum(fu.len(), |i| fu[i]);
    }
    if let Some(cell) = first_below(&b, neg_floor) {
        return Err(Error::Negative {
            field: "u",
            cell,
            value: b[cell],
        });
    }
    let b_nonneg = first_below(&b, 0.0).is_none();
    let b_u = Field::new(spec, b)?;
    let d_face = model::face_diffusivity(&state.u, params);
    let coupling = FaceField::from_interior(spec, |a, lo, _| {
        let h = spec.spacing(a);
        dt * d_face.axis(a)[spec.face_of(lo, a, true)] / (h * h)
    });
    let mut diag = vec![0.0; spec.len()];
    par::fill(&mut diag, |i| 1.0 + dt * mu * un[i]);
    let op_u = FaceOperator::new(diag, coupling)?;
    let (u_next, _) = solve_spd(
        &op_u,
        &b_u,
        Some(&state.u),
        cfg.linear_tol,
        cfg.max_linear_iters,
    )?;
    let mut u_next = u_next.into_values();
    if b_nonneg {
        project(&mut u_next, 0.0, f64::INFINITY);
    }
    // the wall fluxes vanish, so Σ b = (1 + dt μ) Σ uⁿ + dt Σ f_u exactly
    let target = (1.0 + dt * mu) * par::sum(un.len(), |i| un[i]) + forced_mass;
    let current = par::sum(un.len(), |i| (1.0 + dt * mu * un[i]) * u_next[i]);
    if current > 0.0 && target > 0.0 {
        let scale = target / current;
        par::update(&mut u_next, |_, x| x * scale);
    }
    if let Some(cell) = first_below(&u_next, neg_floor) {
        return Err(Error::Negative {
            field: "u",
            cell,
            value: u_next[cell],
        });
    }
    Ok(State {
        u: Field::new(spec, u_next)?,
        v: v_next,
        t: state.t + dt,
    })
}

/// Largest admissible step: the advective limit `cfl · h_a / (2N max|χ ∂_a v|)` over all axes,
/// `dt_max`, and `dt μ max u ≤ 1`.
pub fn choose_dt(state: &State, params: &ModelParams, cfg: &SolverConfig) -> f64 {
    let spec = *state.spec();
    let v = state.v.values();
    let mut dt = cfg.dt_max;
    let two_n = 2.0 * spec.dim() as f64;
    for a in 0..spec.dim() {
        let h = spec.spacing(a);
        let s = spec.stride(a);
        let n = spec.cells()[a];
        let dv_max = par::max(spec.len(), |i| {
            if (i / s) % n + 1 < n {
                (v[i + s] - v[i]).abs()
            } else {
                0.0
            }
        });
        let speed = params.chi * dv_max / h;
        if speed > 0.0 {
            dt = dt.min(cfg.cfl_safety * h / (two_n * speed));
        }
    }
    let growth = params.mu * state.u.max();
    if growth > 0.0 {
        dt = dt.min(1.0 / growth);
    }
    dt
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    DtUnderflow,
    PositivityFailure,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::DtUnderflow => "dt_underflow",
            RunStatus::PositivityFailure => "positivity_failure",
        }
    }
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunStats {
    pub accepted: usize,
    pub rejected: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Message of the last rejected step, if any.
    pub last_rejection: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<State>,
    pub diag: DiagSeries,
    pub status: RunStatus,
    pub stats: RunStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.snapshots.last().expect("trajectory holds the initial state")
    }
}

/// Called once per accepted step.
pub trait StepObserver {
    fn on_accept(&mut self, prev: &State, next: &State, dt: f64);
}

/// Integrates from `initial` to `cfg.t_end`.
///
/// Each step uses `min(choose_dt, 2·previous dt)` (the first one `dt_init`), shortened to land on
/// snapshot times. Failed steps are retried with half the step up to [`MAX_HALVINGS`] times.
pub fn run(
    initial: &State,
    params: &ModelParams,
    cfg: &SolverConfig,
    diag_cfg: &DiagConfig,
    observers: &mut [&mut dyn StepObserver],
) -> Result<Trajectory> {
    run_with_source(initial, params, cfg, diag_cfg, observers, None)
}

pub fn run_with_source(
    initial: &State,
    params: &ModelParams,
    cfg: &SolverConfig,
    diag_cfg: &DiagConfig,
    observers: &mut [&mut dyn StepObserver],
    source: Option<&dyn Source>,
) -> Result<Trajectory> {
    params.validate()?;
    cfg.validate()?;
    diag_cfg.validate()?;
    let initial = State::new(initial.u.clone(), initial.v.clone(), initial.t)?;
    if initial.t >= cfg.t_end {
        return Err(Error::param("t_end", "must exceed the initial time"));
    }

    let mut diag = DiagSeries::new(diag_cfg, cfg.t_end);
    diag.push(diagnostics::functional_snapshot(&initial, params, diag_cfg))?;
    let mut snapshots = vec![initial.clone()];
    let mut stats = RunStats {
        dt_min: f64::INFINITY,
        ..RunStats::default()
    };
    let mut status = RunStatus::Completed;
    let mut state = initial;
    let mut dt_prev = cfg.dt_init / 2.0;
    let mut snap_index = (state.t / cfg.snapshot_every).floor() as u64 + 1;
    let underflow = cfg.dt_max * 1e-12;

    while state.t < cfg.t_end {
        let next_snap = (snap_index as f64 * cfg.snapshot_every).min(cfg.t_end);
        let target = if next_snap > state.t { next_snap } else { cfg.t_end };
        let mut dt = choose_dt(&state, params, cfg).min(2.0 * dt_prev);
        let mut lands = false;
        if state.t + dt >= target - 1e-12 * target.max(1.0) {
            dt = target - state.t;
            lands = true;
        }
        if dt < underflow {
            status = RunStatus::DtUnderflow;
            break;
        }

        let mut accepted = None;
        let mut last_err = None;
        for _ in 0..=MAX_HALVINGS {
            match step_with_source(&state, dt, params, cfg, source) {
                Ok(next) => {
                    accepted = Some(next);
                    break;
                }
                Err(e) => {
                    stats.rejected += 1;
                    last_err = Some(e);
                    dt *= 0.5;
                    lands = false;
                }
            }
        }
        if let Some(e) = &last_err {
            stats.last_rejection = Some(e.to_string());
        }
        let Some(mut next) = accepted else {
            status = match last_err {
                Some(Error::Negative { .. }) => RunStatus::PositivityFailure,
                _ => RunStatus::DtUnderflow,
            };
            break;
        };
        if lands {
            next.t = target;
        }
        if next.u.min() < -cfg.positivity_tol || next.v.min() < -cfg.positivity_tol {
            status = RunStatus::PositivityFailure;
            break;
        }

        for obs in observers.iter_mut() {
            obs.on_accept(&state, &next, dt);
        }
        diag.push(diagnostics::functional_snapshot(&next, params, diag_cfg))?;
        stats.accepted += 1;
        stats.dt_min = stats.dt_min.min(dt);
        stats.dt_max = stats.dt_max.max(dt);
        dt_prev = dt;
        if lands && target == next_snap {
            snapshots.push(next.clone());
            snap_index += 1;
        }
        state = next;
    }
    if snapshots.last().map(|s| s.t) != Some(state.t) {
        snapshots.push(state);
    }
    if stats.accepted == 0 {
        stats.dt_min = 0.0;
    }
    Ok(Trajectory {
        snapshots,
        diag,
        status,
        stats,
    })
}
