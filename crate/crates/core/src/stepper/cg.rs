//! Preconditioned conjugate gradients for the symmetric positive-definite systems of
//! the implicit sub-steps.

use super::mg::{Multigrid, Preconditioner};
use crate::error::{Error, Result};
use crate::grid::{FaceField, Field, GridSpec};
use crate::par;

pub trait LinearOperator: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply(&self, x: &[f64], out: &mut [f64]);

    /// Diagonal entries, used as a Jacobi preconditioner when available.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }

    /// Preconditioner to use instead of Jacobi scaling.
    fn preconditioner(&self) -> Option<Box<dyn Preconditioner + '_>> {
        None
    }
}

/// The identity map on `n` unknowns.
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn len(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
}

/// `(A x)_i = d_i x_i + Σ_{faces f of i} c_f (x_i − x_{neighbour across f})`.
///
/// With `d_i > 0` and `c_f ≥ 0` this is a symmetric, strictly diagonally dominant M-matrix.
#[derive(Clone, Debug)]
pub struct FaceOperator {
    spec: GridSpec,
    diag: Vec<f64>,
    coupling: FaceField,
    /// Per axis, the coupling of each cell's lower and upper face (zero on walls).
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
}

impl FaceOperator {
    pub fn new(diag: Vec<f64>, coupling: FaceField) -> Result<Self> {
        let spec = *coupling.spec();
        if diag.len() != spec.len() {
            return Err(Error::SizeMismatch {
                expected: spec.len(),
                got: diag.len(),
            });
        }
        let per_cell = |upper: bool| -> Vec<Vec<f64>> {
            (0..spec.dim())
                .map(|a| {
                    let c = coupling.axis(a);
                    let mut out = vec![0.0; spec.len()];
                    par::fill(&mut out, |i| c[spec.face_of(i, a, upper)]);
                    out
                })
                .collect()
        };
        let lower = per_cell(false);
        let upper = per_cell(true);
        Ok(FaceOperator {
            spec,
            diag,
            coupling,
            lower,
            upper,
        })
    }

    /// `diag + dt · (−Δ)` with the mirrored-ghost Laplacian.
    pub fn shifted_laplacian(diag: Vec<f64>, dt: f64, spec: GridSpec) -> Result<Self> {
        let coupling = FaceField::from_interior(spec, |a, _, _| {
            let h = spec.spacing(a);
            dt / (h * h)
        });
        FaceOperator::new(diag, coupling)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn coupling(&self) -> &FaceField {
        &self.coupling
    }

    /// `Σ_f c_f x_{neighbour across f}` over the interior faces of cell `i`.
    #[inline]
    pub(super) fn neighbour_sum(&self, x: &[f64], i: usize) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.spec.dim() {
            let s = self.spec.stride(a);
            let (cl, cu) = (self.lower[a][i], self.upper[a][i]);
            if cl != 0.0 {
                acc += cl * x[i - s];
            }
            if cu != 0.0 {
                acc += cu * x[i + s];
            }
        }
        acc
    }

    #[inline]
    pub(super) fn row(&self, x: &[f64], i: usize) -> f64 {
        let xi = x[i];
        let mut acc = self.diag[i] * xi;
        for a in 0..self.spec.dim() {
            let s = self.spec.stride(a);
            let (cl, cu) = (self.lower[a][i], self.upper[a][i]);
            if cl != 0.0 {
                acc += cl * (xi - x[i - s]);
            }
            if cu != 0.0 {
                acc += cu * (xi - x[i + s]);
            }
        }
        acc
    }

    pub(super) fn apply_seq(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(x, i);
        }
    }

    /// `d_i + Σ_f c_f`, the diagonal of the assembled matrix.
    pub(super) fn full_diagonal(&self) -> Vec<f64> {
        let mut d = self.diag.clone();
        par::update(&mut d, |i, di| {
            let mut s = di;
            for a in 0..self.spec.dim() {
                s += self.lower[a][i] + self.upper[a][i];
            }
            s
        });
        d
    }
}

impl LinearOperator for FaceOperator {
    fn len(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        par::fill(out, |i| self.row(x, i));
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.full_diagonal())
    }

    fn preconditioner(&self) -> Option<Box<dyn Preconditioner + '_>> {
        Some(Box::new(Multigrid::new(self)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖b − A x‖₂ / ‖b‖₂`, recomputed from the returned solution.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    par::sum(a.len(), |i| a[i] * b[i])
}

fn residual(op: &dyn LinearOperator, b: &[f64], x: &[f64], r: &mut [f64]) {
    op.apply(x, r);
    par::update(r, |i, ax| b[i] - ax);
}

/// Solves `A x = b` to `‖b − A x‖₂ ≤ tol ‖b‖₂`, starting from `guess` (or zero).
///
/// The residual is recomputed from scratch whenever the recurrence claims convergence; if the
/// two disagree the iteration restarts from the current iterate.
pub fn solve_spd(
    op: &dyn LinearOperator,
    rhs: &Field,
    guess: Option<&Field>,
    tol: f64,
    max_iters: usize,
) -> Result<(Field, SolveReport)> {
    let spec = *rhs.spec();
    let n = op.len();
    if n != rhs.len() {
        return Err(Error::SizeMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let b = rhs.values();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            Field::zeros(spec),
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut x = match guess {
        Some(g) => g.values().to_vec(),
        None => vec![0.0; n],
    };
    let pc = op.preconditioner();
    let inv_diag: Vec<f64> = match (&pc, op.diagonal()) {
        (None, Some(d)) => d.iter().map(|v| 1.0 / v).collect(),
        _ => vec![1.0; n],
    };
    let precondition = |r: &[f64], z: &mut [f64]| match &pc {
        Some(pc) => pc.apply(r, z),
        None => par::fill(z, |i| r[i] * inv_diag[i]),
    };
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let target = tol * b_norm;

    loop {
        residual(op, b, &x, &mut r);
        let true_norm = dot(&r, &r).sqrt();
        if true_norm <= target {
            return Ok((
                Field::new(spec, x)?,
                SolveReport {
                    iterations,
                    relative_residual: true_norm / b_norm,
                },
            ));
        }
        if iterations >= max_iters {
            return Err(Error::NoConvergence {
                iterations,
                residual: true_norm / b_norm,
            });
        }
        precondition(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let mut progressed = false;
        while iterations < max_iters {
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            par::update(&mut x, |i, xi| xi + alpha * p[i]);
            par::update(&mut r, |i, ri| ri - alpha * ap[i]);
            iterations += 1;
            progressed = true;
            if dot(&r, &r).sqrt() <= target {
                break;
            }
            precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            par::update(&mut p, |i, pi| z[i] + beta * pi);
        }
        if !progressed {
            return Err(Error::NoConvergence {
                iterations,
                residual: true_norm / b_norm,
            });
        }
    }
}
