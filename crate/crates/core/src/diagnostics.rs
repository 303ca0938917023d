//! Functionals tracked along a trajectory, the ODE-comparison (Grönwall-type) envelope and the
//! bounded/growing classification of finished runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, Field, GridSpec};
use crate::model::{self, ModelParams, State};
use crate::par;
use crate::stepper::RunStatus;

fn default_p_list() -> Vec<f64> {
    vec![2.0, 3.0, 4.0]
}
fn default_beta_list() -> Vec<f64> {
    vec![1.5, 2.0]
}
fn default_floor() -> f64 {
    1e-12
}
fn default_window_fraction() -> f64 {
    0.2
}
fn default_plateau_tol() -> f64 {
    0.01
}
fn default_growth_factor() -> f64 {
    1e3
}
fn default_slope_tol() -> f64 {
    0.05
}
fn default_min_window() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagConfig {
    /// Exponents `p` of the tracked `∫u^p`.
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    /// Exponents `β` of the tracked `∫|∇v|^{2β}`.
    #[serde(default = "default_beta_list")]
    pub beta_list: Vec<f64>,
    /// Space-time window length; `None` means `min(1, t_end / 6)`.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default = "default_floor")]
    pub entropy_floor: f64,
    /// Trailing fraction of the horizon inspected by the classifier.
    #[serde(default = "default_window_fraction")]
    pub window_fraction: f64,
    /// Largest relative variation of `sup u` counted as a plateau.
    #[serde(default = "default_plateau_tol")]
    pub plateau_tol: f64,
    /// `sup u ≥ growth_factor · sup u(0)` classifies as growing.
    #[serde(default = "default_growth_factor")]
    pub growth_factor: f64,
    /// Fitted `d ln sup u / dt` above this classifies as growing.
    #[serde(default = "default_slope_tol")]
    pub slope_tol: f64,
    /// Shortest trailing window (time units) on which a plateau may be declared.
    #[serde(default = "default_min_window")]
    pub min_plateau_window: f64,
}

impl Default for DiagConfig {
    fn default() -> Self {
        DiagConfig {
            p_list: default_p_list(),
            beta_list: default_beta_list(),
            tau: None,
            entropy_floor: default_floor(),
            window_fraction: default_window_fraction(),
            plateau_tol: default_plateau_tol(),
            growth_factor: default_growth_factor(),
            slope_tol: default_slope_tol(),
            min_plateau_window: default_min_window(),
        }
    }
}

impl DiagConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_list.is_empty() || self.p_list.iter().any(|p| !(p.is_finite() && *p > 1.0)) {
            return Err(Error::param("p_list", "needs at least one exponent, all > 1"));
        }
        if self.beta_list.is_empty() || self.beta_list.iter().any(|b| !(b.is_finite() && *b > 1.0))
        {
            return Err(Error::param("beta_list", "needs at least one exponent, all > 1"));
        }
        if let Some(tau) = self.tau {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::param("tau", "must be positive"));
            }
        }
        if !(self.entropy_floor > 0.0) {
            return Err(Error::param("entropy_floor", "must be positive"));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::param("window_fraction", "must lie in (0, 1]"));
        }
        for (name, x) in [
            ("plateau_tol", self.plateau_tol),
            ("growth_factor", self.growth_factor),
            ("slope_tol", self.slope_tol),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if !(self.min_plateau_window >= 0.0) {
            return Err(Error::param("min_plateau_window", "must be nonnegative"));
        }
        Ok(())
    }

    /// Window length for a horizon `t_end`.
    pub fn tau_for(&self, t_end: f64) -> f64 {
        self.tau.unwrap_or_else(|| (t_end / 6.0).min(1.0))
    }
}

/// All functionals at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagRecord {
    pub t: f64,
    pub mass: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    pub min_u: f64,
    pub min_v: f64,
    pub entropy: f64,
    /// `∫|∇v|²` as a sum over faces.
    pub dirichlet: f64,
    pub sup_grad_v: f64,
    pub dissipation: f64,
    /// `∫u^p` for each configured `p`.
    pub lp: Vec<f64>,
    /// `∫|∇v|^{2β}` for each configured `β`.
    pub grad_v_pow: Vec<f64>,
    pub u_sq: f64,
    pub lap_v_sq: f64,
}

impl DiagRecord {
    fn is_finite(&self) -> bool {
        [
            self.t,
            self.mass,
            self.sup_u,
            self.sup_v,
            self.min_u,
            self.min_v,
            self.entropy,
            self.dirichlet,
            self.sup_grad_v,
            self.dissipation,
            self.u_sq,
            self.lap_v_sq,
        ]
        .iter()
        .chain(&self.lp)
        .chain(&self.grad_v_pow)
        .all(|x| x.is_finite())
    }
}

/// Trailing-window integrals `∫_{t−τ}^{t}` of `∫u²`, `∫|∇v|²` and `∫(Δv)²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub u_sq: f64,
    pub grad_v_sq: f64,
    pub lap_v_sq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagSeries {
    pub p_list: Vec<f64>,
    pub beta_list: Vec<f64>,
    pub tau: f64,
    pub records: Vec<DiagRecord>,
    pub windows: Vec<WindowRecord>,
    cumulative: Vec<[f64; 3]>,
}

impl DiagSeries {
    pub fn new(cfg: &DiagConfig, t_end: f64) -> Self {
        DiagSeries {
            p_list: cfg.p_list.clone(),
            beta_list: cfg.beta_list.clone(),
            tau: cfg.tau_for(t_end),
            records: Vec::new(),
            windows: Vec::new(),
            cumulative: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn column(&self, f: impl Fn(&DiagRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    pub fn push(&mut self, rec: DiagRecord) -> Result<()> {
        if !rec.is_finite() {
            return Err(Error::NonFinite {
                field: "diagnostic record",
                cell: self.records.len(),
            });
        }
        if let Some(last) = self.records.last() {
            if rec.t <= last.t {
                return Err(Error::param(
                    "t",
                    format!("diagnostic times must increase ({} after {})", rec.t, last.t),
                ));
            }
        }
        let g = [rec.u_sq, rec.dirichlet, rec.lap_v_sq];
        let cum = match (self.records.last(), self.cumulative.last()) {
            (Some(prev), Some(c)) => {
                let gp = [prev.u_sq, prev.dirichlet, prev.lap_v_sq];
                let dt = rec.t - prev.t;
                [0, 1, 2].map(|k| c[k] + 0.5 * dt * (g[k] + gp[k]))
            }
            _ => [0.0; 3],
        };
        self.records.push(rec);
        self.cumulative.push(cum);
        let n = self.records.len() - 1;
        let t = self.records[n].t;
        let start = (t - self.tau).max(self.records[0].t);
        let at_start = self.cumulative_at(start);
        self.windows.push(WindowRecord {
            u_sq: cum[0] - at_start[0],
            grad_v_sq: cum[1] - at_start[1],
            lap_v_sq: cum[2] - at_start[2],
        });
        Ok(())
    }

    /// Running trapezoid integral evaluated at `s`, integrand interpolated linearly.
    fn cumulative_at(&self, s: f64) -> [f64; 3] {
        let times = &self.records;
        let j = times.partition_point(|r| r.t <= s).saturating_sub(1);
        let (rj, cj) = (&self.records[j], self.cumulative[j]);
        if j + 1 >= self.records.len() || s <= rj.t {
            return cj;
        }
        let rn = &self.records[j + 1];
        let theta = (s - rj.t) / (rn.t - rj.t);
        let gj = [rj.u_sq, rj.dirichlet, rj.lap_v_sq];
        let gn = [rn.u_sq, rn.dirichlet, rn.lap_v_sq];
        [0, 1, 2].map(|k| {
            let gs = gj[k] + theta * (gn[k] - gj[k]);
            cj[k] + 0.5 * (s - rj.t) * (gj[k] + gs)
        })
    }
}

/// `∫ u ln u`, with cells at or below `floor` contributing zero (the `0 · ln 0 = 0` convention).
pub fn entropy(u: &Field, floor: f64) -> f64 {
    let v = u.values();
    par::sum(v.len(), |i| if v[i] > floor { v[i] * v[i].ln() } else { 0.0 })
        * u.spec().cell_volume()
}

/// `∫ D(u)|∇u|²/u` as a face sum, with `u` and `D(u)` taken at the face mean of `u` and the
/// denominator clamped below by `floor`.
pub fn dissipation(u: &Field, params: &ModelParams, floor: f64) -> f64 {
    let spec = *u.spec();
    let uv = u.values();
    let g = grid::grad_faces(u);
    let mut total = 0.0;
    for a in 0..spec.dim() {
        let ga = g.axis(a);
        total += par::sum(ga.len(), |fi| match spec.face_cells(fi, a) {
            Some((lo, hi)) => {
                let ubar = 0.5 * (uv[lo] + uv[hi]);
                model::diffusivity_unchecked(ubar, params) * ga[fi] * ga[fi] / ubar.max(floor)
            }
            None => 0.0,
        });
    }
    total * spec.cell_volume()
}

fn integrate_pow(f: &Field, p: f64) -> f64 {
    let v = f.values();
    par::sum(v.len(), |i| v[i].powf(p)) * f.spec().cell_volume()
}

/// Evaluates every configured functional on `state`.
pub fn functional_snapshot(state: &State, params: &ModelParams, cfg: &DiagConfig) -> DiagRecord {
    let spec: GridSpec = *state.spec();
    let u = &state.u;
    let v = &state.v;
    let grad_v = grid::grad_faces(v);
    let grad_norm = grid::cell_gradient_norm(v);
    let lap_v = grid::laplacian_neumann(v);
    let vol = spec.cell_volume();
    let uv = u.values();
    DiagRecord {
        t: state.t,
        mass: grid::integrate(u),
        sup_u: u.max(),
        sup_v: v.max(),
        min_u: u.min(),
        min_v: v.min(),
        entropy: entropy(u, cfg.entropy_floor),
        dirichlet: grad_v.sum_squares() * vol,
        sup_grad_v: grad_norm.max(),
        dissipation: dissipation(u, params, cfg.entropy_floor),
        lp: cfg.p_list.iter().map(|p| integrate_pow(u, *p)).collect(),
        grad_v_pow: cfg
            .beta_list
            .iter()
            .map(|b| integrate_pow(&grad_norm, 2.0 * b))
            .collect(),
        u_sq: par::sum(uv.len(), |i| uv[i] * uv[i]) * vol,
        lap_v_sq: grid::integrate_product(&lap_v, &lap_v),
    }
}

/// `max{y₀ + B, B/(Aτ) + 2B}`: envelope for `y' + A y ≤ h` when every window integral
/// `∫_t^{t+τ} h` is at most `B`.
pub fn gronwall_bound(y0: f64, a: f64, b: f64, tau: f64) -> f64 {
    (y0 + b).max(b / (a * tau) + 2.0 * b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    /// Largest integral of `h` over a window of length `τ` (clipped to the horizon).
    pub b_estimate: f64,
    pub bound: f64,
    pub max_y: f64,
    /// `bound − max_y`.
    pub margin: f64,
    /// Sample times at which `y` exceeds the envelope.
    pub violations: Vec<f64>,
}

impl GronwallReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_violation(&self) -> Option<f64> {
        self.violations.first().copied()
    }
}

/// Audits a sampled `y` against [`gronwall_bound`], with `B` estimated from the sampled forcing
/// `h` by trapezoid integration over every window `[t_i, t_i + τ]` starting at a sample.
pub fn gronwall_verify(times: &[f64], y: &[f64], h: &[f64], a: f64, tau: f64) -> Result<GronwallReport> {
    if times.len() != y.len() || times.len() != h.len() {
        return Err(Error::param("series", "times, y and h must have equal length"));
    }
    if times.is_empty() {
        return Err(Error::param("series", "must not be empty"));
    }
    if !(a > 0.0 && tau > 0.0) {
        return Err(Error::param("A, tau", "must be positive"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("times", "must be strictly increasing"));
    }
    let mut cum = vec![0.0; times.len()];
    for i in 1..times.len() {
        cum[i] = cum[i - 1] + 0.5 * (times[i] - times[i - 1]) * (h[i] + h[i - 1]);
    }
    let cum_at = |s: f64| -> f64 {
        let j = times.partition_point(|t| *t <= s).saturating_sub(1);
        if j + 1 >= times.len() || s <= times[j] {
            return cum[j];
        }
        let theta = (s - times[j]) / (times[j + 1] - times[j]);
        let hs = h[j] + theta * (h[j + 1] - h[j]);
        cum[j] + 0.5 * (s - times[j]) * (h[j] + hs)
    };
    let t_last = *times.last().unwrap();
    let b = times
        .iter()
        .map(|t| cum_at((t + tau).min(t_last)) - cum_at(*t))
        .fold(0.0, f64::max);
    let bound = gronwall_bound(y[0], a, b, tau);
    let slack = 1e-12 * bound.abs().max(1.0);
    let violations = times
        .iter()
        .zip(y)
        .filter(|(_, yi)| **yi > bound + slack)
        .map(|(t, _)| *t)
        .collect();
    let max_y = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(GronwallReport {
        b_estimate: b,
        bound,
        max_y,
        margin: bound - max_y,
        violations,
    })
}

/// Audits the entropy along a run against the differential inequality
/// `d/dt ∫u ln u + ∫u ln u ≤ (χ²/μ)∫(Δv)² + C`.
///
/// `y` is the entropy shifted by `|Ω|/e` so that it is nonnegative, `A = 1`, and `C` is the
/// smallest constant for which the inequality holds at every sampled step (forward differences).
pub fn audit_entropy(series: &DiagSeries, params: &ModelParams, domain_volume: f64) -> Result<GronwallReport> {
    if params.mu <= 0.0 {
        return Err(Error::param("mu", "the entropy audit needs a positive logistic rate"));
    }
    let t = series.times();
    let shift = domain_volume / std::f64::consts::E;
    let y: Vec<f64> = series.records.iter().map(|r| r.entropy + shift).collect();
    let coupling = params.chi * params.chi / params.mu;
    let lap: Vec<f64> = series.records.iter().map(|r| coupling * r.lap_v_sq).collect();
    let mut c = 0.0f64;
    for i in 0..t.len().saturating_sub(1) {
        let dy = (y[i + 1] - y[i]) / (t[i + 1] - t[i]);
        c = c.max(dy + y[i] - lap[i]);
    }
    let h: Vec<f64> = lap.iter().map(|l| l + c).collect();
    gronwall_verify(&t, &y, &h, 1.0, series.tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Bounded,
    Growing,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Bounded => "Bounded",
            Verdict::Growing => "Growing",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub peak_sup_u: f64,
    /// `(max − min) / max` of `sup u` over the trailing window.
    pub plateau_ratio: f64,
    /// Least-squares slope of `ln sup u` against `t` over the trailing window.
    pub log_slope: f64,
    pub v_max_principle_ok: bool,
    pub entropy_peak: f64,
}

/// Relative variation `(max − min) / scale` of the samples with `t ≥ t_from`.
pub fn trailing_variation(times: &[f64], values: &[f64], t_from: f64, scale: f64) -> f64 {
    let (lo, hi) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_from)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| {
            (lo.min(*v), hi.max(*v))
        });
    if hi < lo {
        return f64::NAN;
    }
    (hi - lo) / scale
}

fn fit_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    if t.len() < 2 {
        return 0.0;
    }
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (ti, yi) in t.iter().zip(y) {
        sxy += (ti - tm) * (yi - ym);
        sxx += (ti - tm) * (ti - tm);
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Bounded / Growing / Inconclusive verdict from the `sup u` series.
///
/// * Growing: `sup u` reached `growth_factor · sup u(0)`, the run ended in `dt_underflow`, or the
///   fitted log-slope over the trailing window exceeds `slope_tol`.
/// * Inconclusive: the series stops short of `t_end`, the trailing window is shorter than
///   `min_plateau_window` or holds fewer than three samples, or no other rule applies.
/// * Bounded: trailing relative variation below `plateau_tol`.
pub fn classify_run(series: &DiagSeries, status: RunStatus, t_end: f64, cfg: &DiagConfig) -> RunOutcome {
    let t = series.times();
    let sup_u = series.column(|r| r.sup_u);
    let sup_v = series.column(|r| r.sup_v);
    let sup_u0 = sup_u.first().copied().unwrap_or(0.0);
    let sup_v0 = sup_v.first().copied().unwrap_or(0.0);
    let peak_sup_u = sup_u.iter().copied().fold(0.0, f64::max);
    let v_ok = sup_v.iter().all(|s| *s <= sup_v0 * (1.0 + 1e-12));
    let entropy_peak = series
        .records
        .iter()
        .map(|r| r.entropy)
        .fold(f64::NEG_INFINITY, f64::max);

    let t_from = t_end * (1.0 - cfg.window_fraction);
    let (wt, wy): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(&sup_u)
        .filter(|(ti, _)| **ti >= t_from)
        .map(|(ti, s)| (*ti, *s))
        .unzip();
    let w_max = wy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w_min = wy.iter().copied().fold(f64::INFINITY, f64::min);
    let plateau_ratio = if w_max > 0.0 {
        (w_max - w_min) / w_max
    } else if wy.is_empty() {
        f64::NAN
    } else {
        0.0
    };
    let log_slope = if wy.iter().all(|s| *s > 0.0) {
        fit_slope(&wt, &wy.iter().map(|s| s.ln()).collect::<Vec<_>>())
    } else {
        0.0
    };

    let spans = t
        .last()
        .is_some_and(|last| *last >= t_end * (1.0 - 1e-12));
    let exploded = sup_u0 > 0.0 && peak_sup_u >= cfg.growth_factor * sup_u0;
    let verdict = if exploded || status == RunStatus::DtUnderflow {
        Verdict::Growing
    } else if !spans
        || status != RunStatus::Completed
        || wy.len() < 3
        || cfg.window_fraction * t_end < cfg.min_plateau_window
    {
        Verdict::Inconclusive
    } else if log_slope > cfg.slope_tol {
        Verdict::Growing
    } else if plateau_ratio < cfg.plateau_tol {
        Verdict::Bounded
    } else {
        Verdict::Inconclusive
    };
    RunOutcome {
        verdict,
        peak_sup_u,
        plateau_ratio,
        log_slope,
        v_max_principle_ok: v_ok,
        entropy_peak,
    }
}
