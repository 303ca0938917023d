//! Ground truth for verification: the closed-form spatially homogeneous solution, hand-derived
//! manufactured solutions with their forcing, and refined reference runs.

use std::f64::consts::PI;

use crate::diagnostics::DiagConfig;
use crate::error::{Error, Result};
use crate::grid::{self, Field, GridSpec, MAX_DIM};
use crate::model::{ModelParams, State};
use crate::stepper::{self, SolverConfig, Source, StepObserver, Trajectory};

/// Exact solution for spatially constant data, where the system reduces to
/// `u' = μ u (1 − u)`, `v' = −u v`:
///
/// ```text
/// u(t) = u₀ e^{μt} / (1 − u₀ + u₀ e^{μt})
/// v(t) = v₀ (u₀ e^{μt} + 1 − u₀)^{−1/μ}
/// ```
pub fn homogeneous_solution(u0: f64, v0: f64, mu: f64, t: f64) -> Result<(f64, f64)> {
    if !(u0 >= 0.0 && u0.is_finite()) {
        return Err(Error::param("u0", "must be nonnegative"));
    }
    if !(v0 >= 0.0 && v0.is_finite()) {
        return Err(Error::param("v0", "must be nonnegative"));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::param("mu", "must be positive"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param("t", "must be nonnegative"));
    }
    // 1 − u₀ + u₀e^{μt} = 1 + u₀(e^{μt} − 1) ≥ 1 for u₀ ≥ 0
    let growth = (mu * t).exp_m1();
    let denom = 1.0 + u0 * growth;
    let u = u0 * (mu * t).exp() / denom;
    let v = v0 * (-(u0 * growth).ln_1p() / mu).exp();
    Ok((u, v))
}

/// Manufactured solutions on the unit box with zero normal derivatives on every wall.
///
/// With `φ = cos(πx)` (1D) or `φ = cos(πx)cos(πy)` (2D):
/// `u* = 1 + ½ φ e^{−t}`, `v* = ½ (1 + φ) e^{−t}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmsCase {
    /// `u* ≡ 1`, `v* ≡ 0` in the given dimension: an exact steady state, zero forcing.
    Constant(usize),
    Cosine1d,
    Cosine2d,
}

const AMP_U: f64 = 0.5;
const AMP_V: f64 = 0.5;

impl MmsCase {
    pub const NAMES: [&'static str; 3] = ["constant", "cosine-1d", "cosine-2d"];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "constant" => Ok(MmsCase::Constant(1)),
            "cosine-1d" => Ok(MmsCase::Cosine1d),
            "cosine-2d" => Ok(MmsCase::Cosine2d),
            other => Err(Error::UnknownCase(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MmsCase::Constant(_) => "constant",
            MmsCase::Cosine1d => "cosine-1d",
            MmsCase::Cosine2d => "cosine-2d",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MmsCase::Constant(d) => *d,
            MmsCase::Cosine1d => 1,
            MmsCase::Cosine2d => 2,
        }
    }

    /// Unit box with `n` cells per axis.
    pub fn grid(&self, n: usize) -> Result<GridSpec> {
        GridSpec::uniform(self.dim(), n, 1.0)
    }

    /// `(φ, |∇φ|²)`.
    fn shape(&self, x: &[f64; MAX_DIM]) -> (f64, f64) {
        match self {
            MmsCase::Constant(_) => (0.0, 0.0),
            MmsCase::Cosine1d => {
                let s = (PI * x[0]).sin();
                ((PI * x[0]).cos(), PI * PI * s * s)
            }
            MmsCase::Cosine2d => {
                let (cx, sx) = ((PI * x[0]).cos(), (PI * x[0]).sin());
                let (cy, sy) = ((PI * x[1]).cos(), (PI * x[1]).sin());
                (cx * cy, PI * PI * (sx * sx * cy * cy + cx * cx * sy * sy))
            }
        }
    }

    /// `(u*, v*)` at a point.
    pub fn exact(&self, x: &[f64; MAX_DIM], t: f64) -> (f64, f64) {
        if let MmsCase::Constant(_) = self {
            return (1.0, 0.0);
        }
        let (phi, _) = self.shape(x);
        let e = (-t).exp();
        (1.0 + AMP_U * phi * e, AMP_V * (1.0 + phi) * e)
    }

    /// Forcing `(f_u, f_v)` that makes `(u*, v*)` solve the system:
    ///
    /// ```text
    /// f_u = u*_t − D'(u*)|∇u*|² − D(u*)Δu* + χ(∇u*·∇v* + u*Δv*) − μ(u* − u*²)
    /// f_v = v*_t − Δv* + u* v*
    /// ```
    ///
    /// using `Δφ = −Nπ²φ`.
    pub fn forcing(&self, x: &[f64; MAX_DIM], t: f64, params: &ModelParams) -> (f64, f64) {
        if let MmsCase::Constant(_) = self {
            return (0.0, 0.0);
        }
        let n = self.dim() as f64;
        let (phi, grad_sq) = self.shape(x);
        let e = (-t).exp();
        let u = 1.0 + AMP_U * phi * e;
        let v = AMP_V * (1.0 + phi) * e;
        let u_t = -AMP_U * phi * e;
        let v_t = -v;
        let lap_u = -n * PI * PI * AMP_U * phi * e;
        let lap_v = -n * PI * PI * AMP_V * phi * e;
        let grad_u_sq = AMP_U * AMP_U * e * e * grad_sq;
        let grad_uv = AMP_U * AMP_V * e * e * grad_sq;
        let d = params.c_d * (u + 1.0).powf(params.m - 1.0);
        let d_prime = params.c_d * (params.m - 1.0) * (u + 1.0).powf(params.m - 2.0);
        let f_u = u_t - d_prime * grad_u_sq - d * lap_u + params.chi * (grad_uv + u * lap_v)
            - params.mu * (u - u * u);
        let f_v = v_t - lap_v + u * v;
        (f_u, f_v)
    }

    pub fn exact_state(&self, spec: GridSpec, t: f64) -> Result<State> {
        let u = Field::from_fn(spec, |x| self.exact(&x, t).0)?;
        let v = Field::from_fn(spec, |x| self.exact(&x, t).1)?;
        State::new(u, v, t)
    }
}

/// Forcing of a manufactured case, sampled at cell centres.
pub struct MmsForcing {
    pub case: MmsCase,
    pub params: ModelParams,
}

pub fn mms_forcing(case: MmsCase, params: &ModelParams) -> MmsForcing {
    MmsForcing {
        case,
        params: *params,
    }
}

impl Source for MmsForcing {
    fn sample(&self, spec: &GridSpec, t: f64) -> (Field, Field) {
        let fu = Field::from_fn(*spec, |x| self.case.forcing(&x, t, &self.params).0);
        let fv = Field::from_fn(*spec, |x| self.case.forcing(&x, t, &self.params).1);
        (
            fu.expect("forcing is finite on the unit box"),
            fv.expect("forcing is finite on the unit box"),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmsLevel {
    pub cells: usize,
    pub h: f64,
    pub dt: f64,
    /// Max-norm errors of `u` and `v` against the exact solution at `t_end`.
    pub err_u: f64,
    pub err_v: f64,
}

/// Observed orders `log2(e_k / e_{k+1})` between consecutive levels of a halving sequence.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Runs the forced scheme from the exact initial data on each resolution with
/// `dt = dt_factor · h²` (so the first-order time error does not mask the spatial order) and
/// measures the error at `t_end`.
pub fn mms_study(
    case: MmsCase,
    params: &ModelParams,
    levels: &[usize],
    t_end: f64,
    dt_factor: f64,
) -> Result<Vec<MmsLevel>> {
    let forcing = mms_forcing(case, params);
    let mut out = Vec::with_capacity(levels.len());
    for &n in levels {
        let spec = case.grid(n)?;
        let h = spec.spacing(0);
        let dt = dt_factor * h * h;
        let cfg = SolverConfig {
            dt_init: dt,
            dt_max: dt,
            cfl_safety: 0.5,
            t_end,
            snapshot_every: t_end,
            max_linear_iters: 10_000,
            linear_tol: 1e-12,
            // manufactured forcing is not sign-preserving
            positivity_tol: 1e3,
        };
        let initial = case.exact_state(spec, 0.0)?;
        let traj = stepper::run_with_source(
            &initial,
            params,
            &cfg,
            &DiagConfig::default(),
            &mut [],
            Some(&forcing),
        )?;
        let last = traj.final_state();
        if traj.status != stepper::RunStatus::Completed {
            return Err(Error::param(
                "mms",
                format!("run stopped at t = {} ({})", last.t, traj.status),
            ));
        }
        let exact = case.exact_state(spec, last.t)?;
        let err = |a: &Field, b: &Field| {
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        out.push(MmsLevel {
            cells: n,
            h,
            dt,
            err_u: err(&last.u, &exact.u),
            err_v: err(&last.v, &exact.v),
        });
    }
    Ok(out)
}

/// Same scheme on a grid `refinement` times finer with steps `refinement` times shorter,
/// started from a conservative linear prolongation of `initial` and averaged back onto the
/// coarse grid at every snapshot. The diagnostic series is that of the fine run.
pub fn reference_run(
    initial: &State,
    params: &ModelParams,
    cfg: &SolverConfig,
    diag_cfg: &DiagConfig,
    refinement: usize,
    observers: &mut [&mut dyn StepObserver],
) -> Result<Trajectory> {
    if refinement == 0 {
        return Err(Error::param("refinement", "must be at least 1"));
    }
    let coarse = *initial.spec();
    let fine_initial = State::new(
        grid::prolong_linear(&initial.u, refinement)?,
        grid::prolong_linear(&initial.v, refinement)?,
        initial.t,
    )?;
    let r = refinement as f64;
    let fine_cfg = SolverConfig {
        dt_init: cfg.dt_init / r,
        dt_max: cfg.dt_max / r,
        ..*cfg
    };
    let fine = stepper::run(&fine_initial, params, &fine_cfg, diag_cfg, observers)?;
    let snapshots = fine
        .snapshots
        .iter()
        .map(|s| {
            Ok(State {
                u: grid::restrict_average(&s.u, &coarse, refinement)?,
                v: grid::restrict_average(&s.v, &coarse, refinement)?,
                t: s.t,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        snapshots,
        diag: fine.diag,
        status: fine.status,
        stats: fine.stats,
    })
}
