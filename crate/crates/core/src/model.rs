//! Right-hand sides of the chemotaxis–consumption system
//!
//! ```text
//! u_t = ∇·(D(u)∇u) − χ∇·(u∇v) + μ(u − u²)
//! v_t = Δv − uv
//! ```
//!
//! with zero-flux walls, the power-law diffusivity `D(u) = C_D (u+1)^{m−1}` and the critical
//! diffusion exponent separating the guaranteed-bounded regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, FaceField, Field, GridSpec};
use crate::par;

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Chemosensitivity χ.
    pub chi: f64,
    /// Logistic rate μ. Zero is accepted for test configurations.
    pub mu: f64,
    /// Diffusion exponent m.
    pub m: f64,
    /// Diffusivity floor constant C_D.
    #[serde(default = "one")]
    pub c_d: f64,
    /// Maximal-regularity constant λ₀; has no constructive value, so it is a user input.
    #[serde(default = "one")]
    pub lambda0: f64,
}

impl ModelParams {
    pub fn new(chi: f64, mu: f64, m: f64) -> Result<Self> {
        let p = ModelParams {
            chi,
            mu,
            m,
            c_d: 1.0,
            lambda0: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi.is_finite() && self.chi >= 0.0) {
            return Err(Error::param("chi", format!("must be nonnegative (got {})", self.chi)));
        }
        let positive = [("c_d", self.c_d), ("lambda0", self.lambda0)];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::param(name, format!("must be positive and finite (got {x})")));
            }
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::param("mu", format!("must be nonnegative (got {})", self.mu)));
        }
        if !self.m.is_finite() {
            return Err(Error::param("m", "must be finite"));
        }
        Ok(())
    }

    /// Threshold exponent for these parameters; see [`threshold_m`].
    pub fn threshold(&self, sup_v0: f64, dim: usize) -> f64 {
        threshold_m(self, sup_v0, dim)
    }
}

/// Cell density `u`, chemoattractant `v` and time.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: Field,
    pub v: Field,
    pub t: f64,
}

impl State {
    pub fn new(u: Field, v: Field, t: f64) -> Result<Self> {
        if u.spec() != v.spec() {
            return Err(Error::Grid("u and v live on different grids".into()));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::param("t", format!("must be a nonnegative time (got {t})")));
        }
        check_nonnegative("u", &u)?;
        check_nonnegative("v", &v)?;
        Ok(State { u, v, t })
    }

    pub fn spec(&self) -> &GridSpec {
        self.u.spec()
    }
}

pub(crate) fn check_nonnegative(name: &'static str, f: &Field) -> Result<()> {
    match f.values().iter().position(|x| *x < 0.0) {
        Some(cell) => Err(Error::Negative {
            field: name,
            cell,
            value: f.values()[cell],
        }),
        None => Ok(()),
    }
}

/// `D(u) = C_D (u+1)^{m−1}`, the smallest diffusivity the boundedness result admits.
pub fn diffusivity(u: f64, params: &ModelParams) -> Result<f64> {
    if u < 0.0 || u.is_nan() {
        return Err(Error::Negative {
            field: "u",
            cell: usize::MAX,
            value: u,
        });
    }
    Ok(diffusivity_unchecked(u, params))
}

#[inline]
pub(crate) fn diffusivity_unchecked(u: f64, params: &ModelParams) -> f64 {
    if params.m == 1.0 {
        params.c_d
    } else {
        params.c_d * (u + 1.0).powf(params.m - 1.0)
    }
}

/// Arithmetic mean of `D(u)` of the two cells sharing each interior face.
pub fn face_diffusivity(u: &Field, params: &ModelParams) -> FaceField {
    let spec = *u.spec();
    let d = u.map(|x| diffusivity_unchecked(x, params));
    let dv = d.values();
    FaceField::from_interior(spec, |_, lo, hi| 0.5 * (dv[lo] + dv[hi]))
}

/// Face velocity `χ ∂v/∂x_a` used to advect `u`.
pub fn chemotactic_velocity(v: &Field, chi: f64) -> FaceField {
    let spec = *v.spec();
    let vv = v.values();
    FaceField::from_interior(spec, |a, lo, hi| chi * (vv[hi] - vv[lo]) / spec.spacing(a))
}

/// Upwind flux `w · u_upstream` for the face velocity `w`.
pub fn upwind_flux(u: &Field, velocity: &FaceField) -> FaceField {
    let spec = *u.spec();
    let uv = u.values();
    FaceField::from_interior(spec, |a, lo, hi| {
        let w = velocity.axis(a)[spec.face_of(lo, a, true)];
        if w > 0.0 {
            w * uv[lo]
        } else {
            w * uv[hi]
        }
    })
}

/// Discrete `∇·(D(u)∇u) − χ∇·(u∇v) + μ(u − u²)`.
pub fn rhs_u(state: &State, params: &ModelParams) -> Result<Field> {
    check_nonnegative("u", &state.u)?;
    let spec = *state.spec();
    let u = state.u.values();
    let d_face = face_diffusivity(&state.u, params);
    let vel = chemotactic_velocity(&state.v, params.chi);
    let chemo = upwind_flux(&state.u, &vel);
    let total = FaceField::from_interior(spec, |a, lo, hi| {
        let f = spec.face_of(lo, a, true);
        d_face.axis(a)[f] * (u[hi] - u[lo]) / spec.spacing(a) - chemo.axis(a)[f]
    });
    let div = grid::div_faces(&total);
    let dv = div.values();
    let mut out = vec![0.0; spec.len()];
    let mu = params.mu;
    par::fill(&mut out, |i| dv[i] + mu * (u[i] - u[i] * u[i]));
    Ok(Field::from_vec(spec, out))
}

/// Discrete `Δv − uv`.
pub fn rhs_v(state: &State, _params: &ModelParams) -> Result<Field> {
    let spec = *state.spec();
    let lap = grid::laplacian_neumann(&state.v);
    let (l, u, v) = (lap.values(), state.u.values(), state.v.values());
    let mut out = vec![0.0; spec.len()];
    par::fill(&mut out, |i| l[i] - u[i] * v[i]);
    Ok(Field::from_vec(spec, out))
}

/// Critical diffusion exponent: `1 − μ / (χ [1 + 8 λ₀ ‖v₀‖_∞])` for `N ≤ 2`, `1` for `N ≥ 3`.
/// Boundedness is guaranteed for `m` strictly above this value. Without chemotaxis (`χ = 0`)
/// there is no restriction and the result is `−∞`.
pub fn threshold_m(params: &ModelParams, sup_v0: f64, dim: usize) -> f64 {
    if dim >= 3 {
        return 1.0;
    }
    if params.chi == 0.0 {
        return f64::NEG_INFINITY;
    }
    1.0 - params.mu / (params.chi * (1.0 + params.lambda0 * sup_v0 * 8.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(chi: f64, mu: f64, m: f64) -> ModelParams {
        ModelParams::new(chi, mu, m).unwrap()
    }

    fn random_state(spec: GridSpec, seed: u64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..spec.len()).map(|_| rng.gen_range(0.1..3.0)).collect();
        let v: Vec<f64> = (0..spec.len()).map(|_| rng.gen_range(0.0..2.0)).collect();
        State::new(
            Field::new(spec, u).unwrap(),
            Field::new(spec, v).unwrap(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn diffusivity_values() {
        for m in [-1.0, 0.5, 1.0, 3.0] {
            assert_eq!(diffusivity(0.0, &params(1.0, 1.0, m)).unwrap(), 1.0);
        }
        let mut p = params(1.0, 1.0, 1.0);
        p.c_d = 2.5;
        for u in [0.0, 0.3, 7.0, 1e6] {
            assert_eq!(diffusivity(u, &p).unwrap(), 2.5);
        }
        assert_eq!(diffusivity(1.0, &params(1.0, 1.0, 2.0)).unwrap(), 2.0);
        assert!(diffusivity(-1e-3, &p).is_err());
    }

    #[test]
    fn diffusivity_monotonicity_follows_exponent() {
        let us = [0.0, 0.5, 1.0, 4.0, 20.0];
        for (m, sign) in [(1.7, 1.0), (0.6, -1.0)] {
            let p = params(1.0, 1.0, m);
            for w in us.windows(2) {
                let d0 = diffusivity(w[0], &p).unwrap();
                let d1 = diffusivity(w[1], &p).unwrap();
                assert!(sign * (d1 - d0) > 0.0);
            }
        }
    }

    #[test]
    fn params_validation_names_field() {
        let mut p = params(1.0, 1.0, 1.5);
        p.chi = -1.0;
        assert!(p.validate().unwrap_err().to_string().contains("`chi`"));
        let mut p = params(1.0, 1.0, 1.5);
        p.mu = -1.0;
        assert!(p.validate().unwrap_err().to_string().contains("`mu`"));
        let mut p = params(1.0, 1.0, 1.5);
        p.m = f64::NAN;
        assert!(p.validate().unwrap_err().to_string().contains("`m`"));
    }

    #[test]
    fn rhs_on_constant_states() {
        let spec = GridSpec::new(&[6, 5], &[1.0, 1.0]).unwrap();
        let p = params(2.0, 0.7, 1.5);
        for a in [0.0, 0.4, 1.0, 2.5] {
            let s = State::new(Field::constant(spec, a), Field::constant(spec, 0.3), 0.0).unwrap();
            let r = rhs_u(&s, &p).unwrap();
            assert!(r.values().iter().all(|x| *x == p.mu * (a - a * a)));
        }
        let s = State::new(Field::constant(spec, 1.0), Field::zeros(spec), 0.0).unwrap();
        assert!(rhs_u(&s, &p).unwrap().values().iter().all(|x| *x == 0.0));
        assert!(rhs_v(&s, &p).unwrap().values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn rhs_v_examples() {
        let spec = GridSpec::new(&[5], &[1.0]).unwrap();
        let p = params(1.0, 1.0, 1.0);
        let s = State::new(Field::constant(spec, 3.0), Field::zeros(spec), 0.0).unwrap();
        assert!(rhs_v(&s, &p).unwrap().values().iter().all(|x| *x == 0.0));
        let s = State::new(Field::constant(spec, 1.0), Field::constant(spec, 0.8), 0.0).unwrap();
        assert!(rhs_v(&s, &p).unwrap().values().iter().all(|x| *x == -0.8));
    }

    #[test]
    fn flux_terms_integrate_to_zero() {
        let spec = GridSpec::new(&[9, 7], &[1.3, 0.8]).unwrap();
        for seed in 0..5 {
            let s = random_state(spec, seed);
            let p = params(1.7, 0.9, 1.4);
            let lhs = grid::integrate(&rhs_u(&s, &p).unwrap());
            // direct summation of the reaction term, independent of the flux code
            let vol = spec.cell_volume();
            let rhs: f64 = s
                .u
                .values()
                .iter()
                .map(|u| p.mu * (u - u * u) * vol)
                .sum();
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");

            let lv = grid::integrate(&rhs_v(&s, &p).unwrap());
            let uv: f64 = s
                .u
                .values()
                .iter()
                .zip(s.v.values())
                .map(|(a, b)| a * b * vol)
                .sum();
            assert!((lv + uv).abs() <= 1e-12 * uv.abs().max(1.0));
        }
    }

    #[test]
    fn rhs_rejects_negative_density() {
        let spec = GridSpec::new(&[4], &[1.0]).unwrap();
        let s = State {
            u: Field::new(spec, vec![1.0, -0.1, 1.0, 1.0]).unwrap(),
            v: Field::zeros(spec),
            t: 0.0,
        };
        assert!(matches!(
            rhs_u(&s, &params(1.0, 1.0, 1.0)),
            Err(Error::Negative { cell: 1, .. })
        ));
    }

    #[test]
    fn threshold_examples() {
        let p = params(1.0, 1.0, 1.5);
        assert_eq!(threshold_m(&p, 1.0, 3), 1.0);
        assert_eq!(threshold_m(&params(0.1, 9.0, 1.5), 100.0, 3), 1.0);
        assert!((threshold_m(&p, 1.0, 2) - (1.0 - 1.0 / 9.0)).abs() < 1e-15);
        let small_mu = params(1.0, 1e-14, 1.5);
        assert!((threshold_m(&small_mu, 1.0, 2) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn threshold_monotonicity() {
        let base = params(1.0, 1.0, 1.5);
        let t0 = threshold_m(&base, 1.0, 2);
        let mut p = base;
        p.mu = 2.0;
        assert!(threshold_m(&p, 1.0, 2) < t0);
        let mut p = base;
        p.chi = 2.0;
        assert!(threshold_m(&p, 1.0, 2) > t0);
        let mut p = base;
        p.lambda0 = 2.0;
        assert!(threshold_m(&p, 1.0, 2) > t0);
        assert!(threshold_m(&base, 2.0, 1) > threshold_m(&base, 1.0, 1));
    }
}
