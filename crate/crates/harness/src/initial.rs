//! Initial data generators.

use chemotaxis_core::{Field, GridSpec, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::InitialCondition;
use crate::error::Result;

/// Builds `(u₀, v₀)` at `t = 0`. Every generator produces nonnegative fields.
pub fn make_initial(init: &InitialCondition, spec: GridSpec, seed: u64) -> Result<State> {
    init.validate(spec.dim())?;
    let (u, v) = match init {
        InitialCondition::Uniform { u, v } => (Field::constant(spec, *u), Field::constant(spec, *v)),
        InitialCondition::GaussianBump {
            amplitude,
            width,
            center,
            background,
            v,
        } => {
            let c: Vec<f64> = match center {
                Some(c) => c.clone(),
                None => spec.lengths().iter().map(|l| 0.5 * l).collect(),
            };
            let two_w2 = 2.0 * width * width;
            let u = Field::from_fn(spec, |x| {
                let r2: f64 = (0..spec.dim()).map(|a| (x[a] - c[a]).powi(2)).sum();
                background + amplitude * (-r2 / two_w2).exp()
            })?;
            (u, Field::constant(spec, *v))
        }
        InitialCondition::RandomPerturbation {
            mean,
            amplitude,
            v,
            v_amplitude,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u: Vec<f64> = (0..spec.len())
                .map(|_| (mean + amplitude * rng.gen_range(-1.0..=1.0)).max(0.0))
                .collect();
            let vv: Vec<f64> = (0..spec.len())
                .map(|_| (v + v_amplitude * rng.gen_range(-1.0..=1.0)).max(0.0))
                .collect();
            (Field::new(spec, u)?, Field::new(spec, vv)?)
        }
    };
    Ok(State::new(u, v, 0.0)?)
}

/// Rescales `v₀` so that its maximum equals `sup_v0` (a constant field when `v₀ ≡ 0`).
pub fn with_sup_v0(state: State, sup_v0: f64) -> Result<State> {
    let spec = *state.spec();
    let max = state.v.max();
    let v = if max > 0.0 {
        let s = sup_v0 / max;
        Field::new(spec, state.v.values().iter().map(|x| x * s).collect())?
    } else {
        Field::constant(spec, sup_v0)
    };
    Ok(State::new(state.u, v, state.t)?)
}
