//! Cell-centred Cartesian grids on boxes `[0, L_0] × … × [0, L_{N-1}]` with zero-flux walls.
//!
//! Cells are stored with axis 0 fastest. Faces normal to axis `a` are stored in the same order
//! with `n_a + 1` positions along that axis; the first and last position are the walls and always
//! hold zero.

use crate::error::{Error, Result};
use crate::par;

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    cells: [usize; MAX_DIM],
    lengths: [f64; MAX_DIM],
}

impl GridSpec {
    /// Requires `1 ≤ N ≤ 3`, at least three cells per axis and positive finite lengths.
    pub fn new(cells: &[usize], lengths: &[f64]) -> Result<Self> {
        let dim = cells.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Grid(format!("dimension must be 1, 2 or 3 (got {dim})")));
        }
        if lengths.len() != dim {
            return Err(Error::Grid(format!(
                "{} cell counts but {} lengths",
                dim,
                lengths.len()
            )));
        }
        let mut spec = GridSpec {
            dim,
            cells: [1; MAX_DIM],
            lengths: [1.0; MAX_DIM],
        };
        for a in 0..dim {
            if cells[a] < 3 {
                return Err(Error::Grid(format!(
                    "axis {a} has {} cells; every axis needs n_i >= 3",
                    cells[a]
                )));
            }
            if !(lengths[a].is_finite() && lengths[a] > 0.0) {
                return Err(Error::Grid(format!(
                    "axis {a} length {} must be positive and finite",
                    lengths[a]
                )));
            }
            spec.cells[a] = cells[a];
            spec.lengths[a] = lengths[a];
        }
        Ok(spec)
    }

    /// `n` cells of width `length / n` along each of `dim` axes.
    pub fn uniform(dim: usize, n: usize, length: f64) -> Result<Self> {
        GridSpec::new(&vec![n; dim], &vec![length; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.cells[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn domain_volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.cells[..axis].iter().product()
    }

    /// Index of cell `idx` along `axis`.
    #[inline]
    pub fn coord(&self, idx: usize, axis: usize) -> usize {
        (idx / self.stride(axis)) % self.cells[axis]
    }

    /// Cell centre; unused trailing axes are reported as 0.
    pub fn center(&self, idx: usize) -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        for (a, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = (self.coord(idx, a) as f64 + 0.5) * self.spacing(a);
        }
        x
    }

    pub fn face_count(&self, axis: usize) -> usize {
        self.len() / self.cells[axis] * (self.cells[axis] + 1)
    }

    /// Face of cell `idx` normal to `axis`, on its upper side if `upper` is set.
    #[inline]
    pub fn face_of(&self, idx: usize, axis: usize, upper: bool) -> usize {
        let s = self.stride(axis);
        let n = self.cells[axis];
        let inner = idx % s;
        let k = (idx / s) % n;
        let outer = idx / (s * n);
        outer * (n + 1) * s + (k + usize::from(upper)) * s + inner
    }

    /// Cells on either side of face `fi` normal to `axis`, or `None` for a wall face.
    #[inline]
    pub fn face_cells(&self, fi: usize, axis: usize) -> Option<(usize, usize)> {
        let s = self.stride(axis);
        let n = self.cells[axis];
        let inner = fi % s;
        let j = (fi / s) % (n + 1);
        if j == 0 || j == n {
            return None;
        }
        let outer = fi / (s * (n + 1));
        let hi = outer * n * s + j * s + inner;
        Some((hi - s, hi))
    }

    /// Same box with every axis split `factor` times finer.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Grid("refinement factor must be positive".into()));
        }
        let cells: Vec<usize> = self.cells().iter().map(|n| n * factor).collect();
        GridSpec::new(&cells, self.lengths())
    }
}

/// One real per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    spec: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::SizeMismatch {
                expected: spec.len(),
                got: values.len(),
            });
        }
        if let Some(cell) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                field: "field",
                cell,
            });
        }
        Ok(Field { spec, values })
    }

    pub(crate) fn from_vec(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Field { spec, values }
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Field {
            spec,
            values: vec![value; spec.len()],
        }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Field::constant(spec, 0.0)
    }

    /// Samples `f` at the cell centres.
    pub fn from_fn<F>(spec: GridSpec, f: F) -> Result<Self>
    where
        F: Fn([f64; MAX_DIM]) -> f64 + Sync + Send,
    {
        let mut values = vec![0.0; spec.len()];
        par::fill(&mut values, |i| f(spec.center(i)));
        Field::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        let v = &self.values;
        par::max(v.len(), |i| v[i])
    }

    pub fn min(&self) -> f64 {
        let v = &self.values;
        par::min(v.len(), |i| v[i])
    }

    pub(crate) fn map<F>(&self, f: F) -> Field
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        let src = &self.values;
        let mut out = vec![0.0; src.len()];
        par::fill(&mut out, |i| f(src[i]));
        Field::from_vec(self.spec, out)
    }
}

/// Face-centred normal components, one array per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceField {
    spec: GridSpec,
    axes: Vec<Vec<f64>>,
}

impl FaceField {
    pub fn zeros(spec: GridSpec) -> Self {
        let axes = (0..spec.dim())
            .map(|a| vec![0.0; spec.face_count(a)])
            .collect();
        FaceField { spec, axes }
    }

    /// Builds interior faces from `f(axis, lower_cell, upper_cell)`; wall faces are zero.
    pub fn from_interior<F>(spec: GridSpec, f: F) -> Self
    where
        F: Fn(usize, usize, usize) -> f64 + Sync + Send,
    {
        let axes = (0..spec.dim())
            .map(|a| {
                let mut faces = vec![0.0; spec.face_count(a)];
                par::fill(&mut faces, |fi| match spec.face_cells(fi, a) {
                    Some((lo, hi)) => f(a, lo, hi),
                    None => 0.0,
                });
                faces
            })
            .collect();
        FaceField { spec, axes }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        &self.axes[axis]
    }

    /// Mutable access for callers that keep the wall faces at zero.
    pub(crate) fn axis_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.axes[axis]
    }

    /// Pointwise product with another face field on the same grid.
    pub fn mul(&self, other: &FaceField) -> FaceField {
        let axes = self
            .axes
            .iter()
            .zip(&other.axes)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect())
            .collect();
        FaceField {
            spec: self.spec,
            axes,
        }
    }

    /// Sum of squares of all face values.
    pub fn sum_squares(&self) -> f64 {
        self.axes
            .iter()
            .map(|v| par::sum(v.len(), |i| v[i] * v[i]))
            .sum()
    }
}

/// Two-point gradient on interior faces, zero on the walls.
pub fn grad_faces(f: &Field) -> FaceField {
    let spec = *f.spec();
    let v = f.values();
    FaceField::from_interior(spec, |a, lo, hi| (v[hi] - v[lo]) / spec.spacing(a))
}

/// Finite-volume divergence: net outflow through each cell's faces over its width.
pub fn div_faces(g: &FaceField) -> Field {
    let spec = *g.spec();
    let mut out = vec![0.0; spec.len()];
    par::fill(&mut out, |i| {
        let mut d = 0.0;
        for a in 0..spec.dim() {
            let faces = g.axis(a);
            d += (faces[spec.face_of(i, a, true)] - faces[spec.face_of(i, a, false)])
                / spec.spacing(a);
        }
        d
    });
    Field::from_vec(spec, out)
}

/// `(2N+1)`-point Laplacian with mirrored ghost cells. Performs the same floating-point
/// operations as `div_faces(&grad_faces(f))` and so agrees with it bit for bit.
pub fn laplacian_neumann(f: &Field) -> Field {
    let spec = *f.spec();
    let v = f.values();
    let mut out = vec![0.0; spec.len()];
    par::fill(&mut out, |i| laplacian_at(&spec, v, i));
    Field::from_vec(spec, out)
}

#[inline]
pub(crate) fn laplacian_at(spec: &GridSpec, v: &[f64], i: usize) -> f64 {
    let mut d = 0.0;
    for a in 0..spec.dim() {
        let h = spec.spacing(a);
        let s = spec.stride(a);
        let k = spec.coord(i, a);
        let up = if k + 1 < spec.cells[a] {
            (v[i + s] - v[i]) / h
        } else {
            0.0
        };
        let lo = if k > 0 { (v[i] - v[i - s]) / h } else { 0.0 };
        d += (up - lo) / h;
    }
    d
}

/// Midpoint rule: `Σ values · Π h_i`.
pub fn integrate(f: &Field) -> f64 {
    let v = f.values();
    par::sum(v.len(), |i| v[i]) * f.spec().cell_volume()
}

/// `Σ a·b · Π h_i` for two fields on the same grid.
pub fn integrate_product(a: &Field, b: &Field) -> f64 {
    let (x, y) = (a.values(), b.values());
    par::sum(x.len(), |i| x[i] * y[i]) * a.spec().cell_volume()
}

/// Cell-centred gradient magnitude from the averages of opposite face values.
pub fn cell_gradient_norm(f: &Field) -> Field {
    let spec = *f.spec();
    let g = grad_faces(f);
    let mut out = vec![0.0; spec.len()];
    par::fill(&mut out, |i| {
        let mut s = 0.0;
        for a in 0..spec.dim() {
            let faces = g.axis(a);
            let c = 0.5 * (faces[spec.face_of(i, a, false)] + faces[spec.face_of(i, a, true)]);
            s += c * c;
        }
        s.sqrt()
    });
    Field::from_vec(spec, out)
}

/// Cell averages of a field on a grid refined `factor` times.
pub fn restrict_average(fine: &Field, coarse: &GridSpec, factor: usize) -> Result<Field> {
    let expected = coarse.refine(factor)?;
    if expected != *fine.spec() {
        return Err(Error::Grid(
            "fine field is not a refinement of the coarse grid".into(),
        ));
    }
    let fv = fine.values();
    let fs = *fine.spec();
    let per_cell = factor.pow(coarse.dim() as u32);
    let mut out = vec![0.0; coarse.len()];
    par::fill(&mut out, |c| {
        let mut base = 0;
        for a in 0..coarse.dim() {
            base += coarse.coord(c, a) * factor * fs.stride(a);
        }
        let mut s = 0.0;
        for sub in 0..per_cell {
            let mut off = 0;
            let mut rem = sub;
            for a in 0..coarse.dim() {
                off += (rem % factor) * fs.stride(a);
                rem /= factor;
            }
            s += fv[base + off];
        }
        s / per_cell as f64
    });
    Ok(Field::from_vec(*coarse, out))
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Conservative prolongation with minmod-limited linear reconstruction per cell: second order
/// for smooth data, preserves cell averages and nonnegativity.
pub fn prolong_linear(coarse: &Field, factor: usize) -> Result<Field> {
    let cs = *coarse.spec();
    let fs = cs.refine(factor)?;
    let cv = coarse.values();
    let mut slopes = vec![[0.0; MAX_DIM]; cs.len()];
    for (c, sl) in slopes.iter_mut().enumerate() {
        for a in 0..cs.dim() {
            let s = cs.stride(a);
            let k = cs.coord(c, a);
            if k == 0 || k + 1 == cs.cells()[a] {
                continue;
            }
            sl[a] = minmod(cv[c] - cv[c - s], cv[c + s] - cv[c]);
        }
    }
    // Per-axis minmod keeps each axis within its neighbours; with several axes the offsets
    // add up, so scale them back to stay above the local minimum.
    let reach = 0.5 - 0.5 / factor as f64;
    for (c, sl) in slopes.iter_mut().enumerate() {
        let mut local_min = cv[c];
        for a in 0..cs.dim() {
            let s = cs.stride(a);
            let k = cs.coord(c, a);
            if k > 0 {
                local_min = local_min.min(cv[c - s]);
            }
            if k + 1 < cs.cells()[a] {
                local_min = local_min.min(cv[c + s]);
            }
        }
        let drop: f64 = sl.iter().map(|x| x.abs() * reach).sum();
        if drop > cv[c] - local_min && drop > 0.0 {
            let phi = (cv[c] - local_min) / drop;
            sl.iter_mut().for_each(|x| *x *= phi);
        }
    }
    let mut out = vec![0.0; fs.len()];
    par::fill(&mut out, |i| {
        let mut c = 0;
        for a in 0..fs.dim() {
            c += (fs.coord(i, a) / factor) * cs.stride(a);
        }
        let mut v = cv[c];
        for a in 0..fs.dim() {
            // offset of the fine centre from the coarse centre, in coarse-cell units
            let frac = ((fs.coord(i, a) % factor) as f64 + 0.5) / factor as f64 - 0.5;
            v += frac * slopes[c][a];
        }
        v
    });
    Ok(Field::from_vec(fs, out))
}
