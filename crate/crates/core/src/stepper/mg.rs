//! Multigrid V-cycle preconditioner for [`FaceOperator`] systems.
//!
//! Coarse levels aggregate blocks of `2` cells along every axis that can still be halved. The
//! coarse diagonal is the sum of the fine diagonal over each block and a coarse face carries the
//! sum of the fine couplings across it divided by the coarsening factor along its normal, which
//! reproduces the rediscretised operator for constant coefficients. Smoothing is red-black
//! Gauss–Seidel, forward before and backward after the coarse correction, and the coarsest level
//! is solved by dense Cholesky, so the cycle is a fixed symmetric positive-definite map as
//! conjugate gradients requires.

use super::cg::FaceOperator;
use crate::grid::{FaceField, GridSpec};
use crate::par;

/// Largest coarsest level factorised densely.
const DIRECT_LIMIT: usize = 64;
/// Symmetric sweeps on a coarsest level that is too large to factorise.
const COARSE_SWEEPS: usize = 8;

pub trait Preconditioner: Sync {
    /// `z ≈ A⁻¹ r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

struct Level {
    op: FaceOperator,
    /// `1 / (d_i + Σ_f c_f)`.
    inv_full_diag: Vec<f64>,
    /// Parity of the coordinate sum.
    colour: Vec<u8>,
    /// Coarse cell of every cell, when a coarser level exists.
    parent: Vec<usize>,
}

impl Level {
    fn new(op: FaceOperator) -> Self {
        let spec = *op.spec();
        let full = op.full_diagonal();
        let mut colour = vec![0u8; spec.len()];
        for (i, c) in colour.iter_mut().enumerate() {
            let s: usize = (0..spec.dim()).map(|a| spec.coord(i, a)).sum();
            *c = (s % 2) as u8;
        }
        Level {
            op,
            inv_full_diag: full.iter().map(|d| 1.0 / d).collect(),
            colour,
            parent: Vec::new(),
        }
    }

    /// Updates the cells of one colour in place.
    fn sweep(&self, b: &[f64], x: &mut Vec<f64>, tmp: &mut Vec<f64>, colour: u8) {
        {
            let xs: &[f64] = x;
            par::fill(tmp, |i| {
                if self.colour[i] == colour {
                    (b[i] + self.op.neighbour_sum(xs, i)) * self.inv_full_diag[i]
                } else {
                    xs[i]
                }
            });
        }
        std::mem::swap(x, tmp);
    }
}

/// Dense `L Lᵀ` factor of a small level.
struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    fn new(op: &FaceOperator) -> Option<Self> {
        let n = op.spec().len();
        let mut a = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            op.apply_seq(&e, &mut col);
            for i in 0..n {
                a[i * n + j] = col[i];
            }
            e[j] = 0.0;
        }
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            if !(d > 0.0) {
                return None;
            }
            let d = d.sqrt();
            a[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = s / d;
            }
        }
        Some(Cholesky { n, l: a })
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
    }
}

pub struct Multigrid {
    levels: Vec<Level>,
    direct: Option<Cholesky>,
}

fn coarsening(spec: &GridSpec) -> Option<Vec<usize>> {
    let factors: Vec<usize> = spec
        .cells()
        .iter()
        .map(|&n| if n % 2 == 0 && n / 2 >= 3 { 2 } else { 1 })
        .collect();
    factors.iter().any(|&f| f > 1).then_some(factors)
}

fn coarsen(op: &FaceOperator, factors: &[usize]) -> (FaceOperator, Vec<usize>) {
    let fine = *op.spec();
    let cells: Vec<usize> = fine.cells().iter().zip(factors).map(|(n, f)| n / f).collect();
    let coarse = GridSpec::new(&cells, fine.lengths()).expect("coarse grid keeps n_i >= 3");
    let parent: Vec<usize> = (0..fine.len())
        .map(|i| {
            (0..fine.dim())
                .map(|a| fine.coord(i, a) / factors[a] * coarse.stride(a))
                .sum()
        })
        .collect();
    let mut diag = vec![0.0; coarse.len()];
    for (i, d) in op.diag().iter().enumerate() {
        diag[parent[i]] += d;
    }
    let mut coupling = FaceField::zeros(coarse);
    for a in 0..fine.dim() {
        let scale = 1.0 / factors[a] as f64;
        let c = op.coupling().axis(a);
        let mut acc = vec![0.0; coarse.face_count(a)];
        for fi in 0..fine.face_count(a) {
            if let Some((lo, hi)) = fine.face_cells(fi, a) {
                let (cl, ch) = (parent[lo], parent[hi]);
                if cl != ch {
                    acc[coarse.face_of(cl, a, true)] += scale * c[fi];
                }
            }
        }
        coupling.axis_mut(a).copy_from_slice(&acc);
    }
    let coarse_op = FaceOperator::new(diag, coupling).expect("sizes match by construction");
    (coarse_op, parent)
}

impl Multigrid {
    pub fn new(op: &FaceOperator) -> Self {
        Multigrid::with_direct_limit(op, DIRECT_LIMIT)
    }

    /// Coarsens until a level has at most `direct_limit` cells (or cannot be halved) and
    /// factorises that level when it is small enough.
    pub fn with_direct_limit(op: &FaceOperator, direct_limit: usize) -> Self {
        let mut levels = vec![Level::new(op.clone())];
        while let Some(factors) = coarsening(levels.last().unwrap().op.spec()) {
            if levels.last().unwrap().op.spec().len() <= direct_limit {
                break;
            }
            let (coarse, parent) = coarsen(&levels.last().unwrap().op, &factors);
            levels.last_mut().unwrap().parent = parent;
            levels.push(Level::new(coarse));
        }
        let last = &levels.last().unwrap().op;
        let direct = if levels.len() > 1 && last.spec().len() <= DIRECT_LIMIT {
            Cholesky::new(last)
        } else {
            None
        };
        Multigrid { levels, direct }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn cycle(&self, l: usize, r: &[f64], z: &mut Vec<f64>) {
        let level = &self.levels[l];
        let n = r.len();
        z.clear();
        z.resize(n, 0.0);
        let mut tmp = vec![0.0; n];
        if l + 1 == self.levels.len() {
            if let Some(ch) = &self.direct {
                ch.solve(r, z);
            } else {
                for _ in 0..COARSE_SWEEPS {
                    level.sweep(r, z, &mut tmp, 0);
                    level.sweep(r, z, &mut tmp, 1);
                }
                for _ in 0..COARSE_SWEEPS {
                    level.sweep(r, z, &mut tmp, 1);
                    level.sweep(r, z, &mut tmp, 0);
                }
            }
            return;
        }
        level.sweep(r, z, &mut tmp, 0);
        level.sweep(r, z, &mut tmp, 1);
        {
            let zs: &[f64] = z;
            par::fill(&mut tmp, |i| r[i] - level.op.row(zs, i));
        }
        let coarse_len = self.levels[l + 1].op.spec().len();
        let mut rc = vec![0.0; coarse_len];
        for (i, p) in level.parent.iter().enumerate() {
            rc[*p] += tmp[i];
        }
        let mut zc = Vec::new();
        self.cycle(l + 1, &rc, &mut zc);
        par::update(z, |i, zi| zi + zc[level.parent[i]]);
        level.sweep(r, z, &mut tmp, 1);
        level.sweep(r, z, &mut tmp, 0);
    }
}

impl Preconditioner for Multigrid {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut out = Vec::with_capacity(r.len());
        self.cycle(0, r, &mut out);
        z.copy_from_slice(&out);
    }
}
