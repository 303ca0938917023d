//! Finite-volume simulation of the quasilinear chemotaxis–consumption system with logistic
//! source,
//!
//! ```text
//! u_t = ∇·(D(u)∇u) − χ∇·(u∇v) + μ(u − u²),   v_t = Δv − uv,
//! ```
//!
//! on boxes with zero-flux walls, together with runtime tracking of the a-priori functionals
//! (mass, entropy, Lᵖ norms, gradient norms, space-time integrals) and a bounded/growing
//! classifier for finished runs.
//!
//! Cell loops run on rayon when the `parallel` feature is on (default); reductions use a fixed
//! chunking so results do not depend on the thread count.

// `!(x > 0.0)` is used deliberately so that NaN fails validation; index loops mirror the
// stencil formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod model;
pub mod oracle;
pub mod par;
pub mod stepper;

pub use diagnostics::{DiagConfig, DiagRecord, DiagSeries, RunOutcome, Verdict};
pub use error::{Error, Result};
pub use grid::{FaceField, Field, GridSpec};
pub use model::{ModelParams, State};
pub use stepper::{RunStatus, SolverConfig, Trajectory};
