//! Cell-centred structured grid, ghost layers and fourth-order difference operators.
//!
//! Cell `(i, j, l)` (0-based) has its centre at `((i + 1/2) hx, (j + 1/2) hy, (l + 1/2) hz)`.
//! Every axis with more than one cell is *active* and carries two ghost layers per side;
//! an axis with a single cell is treated as an invariant direction (no ghosts, zero
//! derivatives).
//!
//! The homogeneous Neumann closure mirrors interior values into the ghosts:
//! `m[-1] = m[0]`, `m[-2] = m[1]`, `m[n] = m[n-1]`, `m[n+1] = m[n-2]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ghost layers per side on an active axis.
pub const GHOSTS: usize = 2;

/// Smallest cell count allowed on an active axis.
pub const MIN_ACTIVE_CELLS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Accuracy of the centred difference stencils.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StencilOrder {
    /// Three-point stencils, `O(h^2)`.
    Second,
    /// Five-point long stencils, `O(h^4)`.
    #[default]
    Fourth,
}

impl StencilOrder {
    /// Second-derivative taps `(offset, weight)`; the operator is `sum(weight * f) / h^2`.
    pub fn d2_taps(self) -> &'static [(isize, f64)] {
        match self {
            StencilOrder::Second => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
            StencilOrder::Fourth => &[
                (-2, -1.0 / 12.0),
                (-1, 16.0 / 12.0),
                (0, -30.0 / 12.0),
                (1, 16.0 / 12.0),
                (2, -1.0 / 12.0),
            ],
        }
    }

    /// First-derivative taps `(offset, weight)`; the operator is `sum(weight * f) / h`.
    pub fn d1_taps(self) -> &'static [(isize, f64)] {
        match self {
            StencilOrder::Second => &[(-1, -0.5), (1, 0.5)],
            StencilOrder::Fourth => &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StencilOrder::Second => "second",
            StencilOrder::Fourth => "fourth",
        }
    }
}

/// Interior index reached by the Neumann mirror closure from a (possibly ghost) index `q`.
#[inline]
pub fn mirror_index(q: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if q < 0 {
        -q - 1
    } else if q >= n {
        2 * n - 1 - q
    } else {
        q
    };
    r as usize
}

/// Grid dimensions and (nondimensional) mesh sizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: [usize; 3],
    h: [f64; 3],
    len: [f64; 3],
}

impl GridSpec {
    pub fn new(counts: [usize; 3], lengths: [f64; 3]) -> Result<Self> {
        let mut problems = Vec::new();
        for a in 0..3 {
            if counts[a] == 0 {
                problems.push(format!("axis {a}: cell count must be >= 1"));
            } else if counts[a] > 1 && counts[a] < MIN_ACTIVE_CELLS {
                problems.push(format!(
                    "axis {a}: {} cells cannot fill two mirror ghost layers (need >= {MIN_ACTIVE_CELLS} or exactly 1)",
                    counts[a]
                ));
            }
            if !(lengths[a].is_finite() && lengths[a] > 0.0) {
                problems.push(format!("axis {a}: length must be positive and finite, got {}", lengths[a]));
            }
        }
        if !problems.is_empty() {
            return Err(Error::ConfigList(problems));
        }
        let h = [
            lengths[0] / counts[0] as f64,
            lengths[1] / counts[1] as f64,
            lengths[2] / counts[2] as f64,
        ];
        Ok(Self { n: counts, h, len: lengths })
    }

    /// One-dimensional grid along x; the inactive axes get unit length.
    pub fn line(n: usize, length: f64) -> Result<Self> {
        Self::new([n, 1, 1], [length, 1.0, 1.0])
    }

    /// Uniform cube `[0, length]^3` with `n` cells per axis.
    pub fn cube(n: usize, length: f64) -> Result<Self> {
        Self::new([n, n, n], [length; 3])
    }

    #[inline]
    pub fn counts(&self) -> [usize; 3] {
        self.n
    }

    #[inline]
    pub fn spacing(&self) -> [f64; 3] {
        self.h
    }

    #[inline]
    pub fn lengths(&self) -> [f64; 3] {
        self.len
    }

    #[inline]
    pub fn count(&self, axis: Axis) -> usize {
        self.n[axis.index()]
    }

    #[inline]
    pub fn h(&self, axis: Axis) -> f64 {
        self.h[axis.index()]
    }

    #[inline]
    pub fn is_active(&self, axis: Axis) -> bool {
        self.n[axis.index()] > 1
    }

    pub fn active_axes(&self) -> impl Iterator<Item = Axis> + '_ {
        Axis::ALL.into_iter().filter(move |&a| self.is_active(a))
    }

    /// Number of active axes.
    pub fn dim(&self) -> usize {
        self.active_axes().count()
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Product of the mesh sizes along active axes (quadrature weight of the discrete norms).
    pub fn active_cell_volume(&self) -> f64 {
        self.active_axes().map(|a| self.h(a)).product()
    }

    /// Product of all three mesh sizes.
    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    /// Measure of the domain along active axes.
    pub fn active_volume(&self) -> f64 {
        self.active_axes().map(|a| self.len[a.index()]).product()
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize, l: usize) -> [f64; 3] {
        [
            (i as f64 + 0.5) * self.h[0],
            (j as f64 + 0.5) * self.h[1],
            (l as f64 + 0.5) * self.h[2],
        ]
    }

    /// Linear interior index with x fastest.
    #[inline]
    pub fn cell_index(&self, i: usize, j: usize, l: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * l)
    }

    #[inline]
    pub fn cell_coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.n[0];
        let r = idx / self.n[0];
        (i, r % self.n[1], r / self.n[1])
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.n, other.n)))
        }
    }
}

/// Padded storage geometry shared by all fields on a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Layout {
    g: [usize; 3],
    p: [usize; 3],
    stride: [usize; 3],
    comp: usize,
}

impl Layout {
    fn new(grid: &GridSpec) -> Self {
        let mut g = [0; 3];
        let mut p = [0; 3];
        for a in 0..3 {
            g[a] = if grid.n[a] > 1 { GHOSTS } else { 0 };
            p[a] = grid.n[a] + 2 * g[a];
        }
        let stride = [1, p[0], p[0] * p[1]];
        Self {
            g,
            p,
            stride,
            comp: p[0] * p[1] * p[2],
        }
    }

    #[inline]
    fn offset(&self, i: isize, j: isize, l: isize) -> usize {
        ((i + self.g[0] as isize) as usize)
            + self.stride[1] * ((j + self.g[1] as isize) as usize)
            + self.stride[2] * ((l + self.g[2] as isize) as usize)
    }
}

/// Scalar per-cell quantity on the interior (x fastest, no ghosts).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            data: vec![0.0; grid.cell_count()],
            grid,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.data[self.grid.cell_index(i, j, l)]
    }
}

/// Three-component field on the cell centres plus ghost layers on each active axis.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField3 {
    grid: GridSpec,
    layout: Layout,
    data: Vec<f64>,
    /// Nondimensional time the field represents.
    pub time: f64,
}

impl VectorField3 {
    pub fn zeros(grid: GridSpec) -> Self {
        let layout = Layout::new(&grid);
        Self {
            grid,
            layout,
            data: vec![0.0; 3 * layout.comp],
            time: 0.0,
        }
    }

    /// Constant value everywhere, ghosts included.
    pub fn uniform(grid: GridSpec, v: [f64; 3]) -> Self {
        let mut f = Self::zeros(grid);
        for c in 0..3 {
            f.comp_mut(c).fill(v[c]);
        }
        f
    }

    /// Samples `func` at every interior cell centre; ghosts are left at zero.
    pub fn from_fn(grid: GridSpec, mut func: impl FnMut([f64; 3]) -> [f64; 3]) -> Self {
        let mut f = Self::zeros(grid);
        let [nx, ny, nz] = grid.n;
        for l in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let v = func(grid.cell_center(i, j, l));
                    f.set(i, j, l, v);
                }
            }
        }
        f
    }

    /// Builds a field from a component-major interior vector (see [`VectorField3::to_flat`]).
    pub fn from_flat(grid: GridSpec, flat: &[f64]) -> Self {
        let mut f = Self::zeros(grid);
        f.copy_from_flat(flat);
        f
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Length of the flattened interior vector, `3 * cells`.
    #[inline]
    pub fn flat_len(&self) -> usize {
        3 * self.grid.cell_count()
    }

    #[inline]
    fn pidx(&self, i: usize, j: usize, l: usize) -> usize {
        self.layout.offset(i as isize, j as isize, l as isize)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> [f64; 3] {
        let p = self.pidx(i, j, l);
        let s = self.layout.comp;
        [self.data[p], self.data[p + s], self.data[p + 2 * s]]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, l: usize, v: [f64; 3]) {
        let p = self.pidx(i, j, l);
        let s = self.layout.comp;
        self.data[p] = v[0];
        self.data[p + s] = v[1];
        self.data[p + 2 * s] = v[2];
    }

    /// Raw access including ghost indices (`-2 ..= n + 1` on active axes).
    #[inline]
    pub fn at(&self, c: usize, i: isize, j: isize, l: isize) -> f64 {
        self.data[c * self.layout.comp + self.layout.offset(i, j, l)]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, i: isize, j: isize, l: isize) -> &mut f64 {
        let o = c * self.layout.comp + self.layout.offset(i, j, l);
        &mut self.data[o]
    }

    #[inline]
    fn comp(&self, c: usize) -> &[f64] {
        &self.data[c * self.layout.comp..(c + 1) * self.layout.comp]
    }

    #[inline]
    fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let s = self.layout.comp;
        &mut self.data[c * s..(c + 1) * s]
    }

    /// Calls `func(i, j, l, cell_index)` for every interior cell, x fastest.
    #[inline]
    pub fn for_each_cell(&self, mut func: impl FnMut(usize, usize, usize, usize)) {
        let [nx, ny, nz] = self.grid.n;
        let mut idx = 0;
        for l in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    func(i, j, l, idx);
                    idx += 1;
                }
            }
        }
    }

    /// Interior values in component-major order: `flat[c * cells + cell_index]`.
    pub fn to_flat(&self, out: &mut [f64]) {
        let n = self.grid.cell_count();
        assert_eq!(out.len(), 3 * n, "flat buffer length");
        let [nx, ny, nz] = self.grid.n;
        for c in 0..3 {
            let src = self.comp(c);
            let dst = &mut out[c * n..(c + 1) * n];
            let mut k = 0;
            for l in 0..nz {
                for j in 0..ny {
                    let p = self.layout.offset(0, j as isize, l as isize);
                    dst[k..k + nx].copy_from_slice(&src[p..p + nx]);
                    k += nx;
                }
            }
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.flat_len()];
        self.to_flat(&mut v);
        v
    }

    /// Overwrites the interior from a component-major vector; ghosts are untouched.
    pub fn copy_from_flat(&mut self, flat: &[f64]) {
        let n = self.grid.cell_count();
        assert_eq!(flat.len(), 3 * n, "flat buffer length");
        let [nx, ny, nz] = self.grid.n;
        let layout = self.layout;
        for c in 0..3 {
            let src = &flat[c * n..(c + 1) * n];
            let dst = self.comp_mut(c);
            let mut k = 0;
            for l in 0..nz {
                for j in 0..ny {
                    let p = layout.offset(0, j as isize, l as isize);
                    dst[p..p + nx].copy_from_slice(&src[k..k + nx]);
                    k += nx;
                }
            }
        }
    }

    /// Fills the ghost layers of every active axis from the interior mirror images.
    ///
    /// Axes are processed in x, y, z order over the full padded extent of the other axes,
    /// so edge and corner ghosts are mirrors of mirrors.
    pub fn apply_neumann_ghost(&mut self) {
        let layout = self.layout;
        let n = self.grid.n;
        for a in 0..3 {
            if n[a] <= 1 {
                continue;
            }
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            let sa = layout.stride[a] as isize;
            let ga = layout.g[a] as isize;
            let na = n[a] as isize;
            for comp in 0..3 {
                let base = comp * layout.comp;
                for pb in 0..layout.p[b] {
                    for pc in 0..layout.p[c] {
                        let origin = (base + pb * layout.stride[b] + pc * layout.stride[c]) as isize;
                        for q in [-2isize, -1, na, na + 1] {
                            let src = mirror_index(q, n[a]) as isize;
                            let dst = origin + (q + ga) * sa;
                            let from = origin + (src + ga) * sa;
                            self.data[dst as usize] = self.data[from as usize];
                        }
                    }
                }
            }
        }
    }

    /// Copy with ghosts filled.
    pub fn with_ghosts(&self) -> Self {
        let mut f = self.clone();
        f.apply_neumann_ghost();
        f
    }

    /// `sum_k weight_k * field_k`, ghosts included. All fields must share the grid.
    pub fn linear_combination(terms: &[(f64, &VectorField3)]) -> Self {
        let (w0, f0) = terms[0];
        let mut out = f0.clone();
        out.data.iter_mut().for_each(|v| *v *= w0);
        for &(w, f) in &terms[1..] {
            debug_assert_eq!(f.grid, out.grid);
            out.data.iter_mut().zip(&f.data).for_each(|(o, &x)| *o += w * x);
        }
        out
    }

    /// `self += w * other` over the whole storage.
    pub fn add_scaled(&mut self, w: f64, other: &VectorField3) {
        debug_assert_eq!(self.grid, other.grid);
        self.data.iter_mut().zip(&other.data).for_each(|(o, &x)| *o += w * x);
    }

    pub fn scale(&mut self, w: f64) {
        self.data.iter_mut().for_each(|v| *v *= w);
    }

    /// Adds a constant vector to every interior cell.
    pub fn add_uniform(&mut self, v: [f64; 3]) {
        let cells: Vec<usize> = self.interior_offsets();
        let s = self.layout.comp;
        for p in cells {
            for c in 0..3 {
                self.data[p + c * s] += v[c];
            }
        }
    }

    fn interior_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.grid.cell_count());
        self.for_each_cell(|i, j, l, _| out.push(self.pidx(i, j, l)));
        out
    }

    /// Applies `func(cell_value) -> new_value` on every interior cell.
    pub fn map_cells(&mut self, mut func: impl FnMut([f64; 3]) -> [f64; 3]) {
        let s = self.layout.comp;
        for p in self.interior_offsets() {
            let v = func([self.data[p], self.data[p + s], self.data[p + 2 * s]]);
            self.data[p] = v[0];
            self.data[p + s] = v[1];
            self.data[p + 2 * s] = v[2];
        }
    }

    /// Interior cell values in x-fastest order.
    pub fn cells(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        let s = self.layout.comp;
        self.interior_offsets()
            .into_iter()
            .map(move |p| [self.data[p], self.data[p + s], self.data[p + 2 * s]])
    }

    pub fn is_finite_interior(&self) -> bool {
        self.cells().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Largest `| |m| - 1 |` over the interior.
    pub fn max_unit_deviation(&self) -> f64 {
        self.cells()
            .map(|v| ((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Sum over interior cells of the pointwise dot product (no volume weight).
    pub fn dot_sum(&self, other: &VectorField3) -> f64 {
        self.cells().zip(other.cells()).map(|(a, b)| dot(a, b)).sum()
    }
}

#[inline]
pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Ghost-filled copy of `f`.
pub fn apply_neumann_ghost(f: &VectorField3) -> VectorField3 {
    f.with_ghosts()
}

/// `out += scale * D2_axis f` on the interior. Requires ghosts on `axis`.
fn accumulate_d2(f: &VectorField3, axis: Axis, order: StencilOrder, scale: f64, out: &mut VectorField3) {
    let a = axis.index();
    let layout = f.layout;
    let s = layout.stride[a];
    let h = f.grid.h[a];
    let [nx, ny, nz] = f.grid.n;
    for c in 0..3 {
        let src = f.comp(c);
        let dst = out.comp_mut(c);
        for l in 0..nz {
            for j in 0..ny {
                let p0 = layout.offset(0, j as isize, l as isize);
                match order {
                    StencilOrder::Fourth => {
                        let w = scale / (12.0 * h * h);
                        for p in p0..p0 + nx {
                            dst[p] += w
                                * (-src[p - 2 * s] + 16.0 * src[p - s] - 30.0 * src[p] + 16.0 * src[p + s]
                                    - src[p + 2 * s]);
                        }
                    }
                    StencilOrder::Second => {
                        let w = scale / (h * h);
                        for p in p0..p0 + nx {
                            dst[p] += w * (src[p - s] - 2.0 * src[p] + src[p + s]);
                        }
                    }
                }
            }
        }
    }
}

/// `out = D1_axis f` on the interior (ghosts of `out` untouched). Requires ghosts on `axis`.
fn write_d1(f: &VectorField3, axis: Axis, order: StencilOrder, out: &mut VectorField3) {
    let a = axis.index();
    let layout = f.layout;
    let s = layout.stride[a];
    let h = f.grid.h[a];
    let [nx, ny, nz] = f.grid.n;
    for c in 0..3 {
        let src = f.comp(c);
        let dst = out.comp_mut(c);
        for l in 0..nz {
            for j in 0..ny {
                let p0 = layout.offset(0, j as isize, l as isize);
                match order {
                    StencilOrder::Fourth => {
                        let w = 1.0 / (12.0 * h);
                        for p in p0..p0 + nx {
                            dst[p] = w * (src[p - 2 * s] - 8.0 * src[p - s] + 8.0 * src[p + s] - src[p + 2 * s]);
                        }
                    }
                    StencilOrder::Second => {
                        let w = 1.0 / (2.0 * h);
                        for p in p0..p0 + nx {
                            dst[p] = w * (src[p + s] - src[p - s]);
                        }
                    }
                }
            }
        }
    }
}

/// First derivative along `axis`. Inactive axes give the zero field.
pub fn d1(f: &VectorField3, axis: Axis, order: StencilOrder) -> VectorField3 {
    let mut out = VectorField3::zeros(f.grid);
    out.time = f.time;
    if f.grid.is_active(axis) {
        write_d1(f, axis, order, &mut out);
    }
    out
}

/// Fourth-order first derivative `(f[-2] - 8 f[-1] + 8 f[+1] - f[+2]) / 12h`.
pub fn d1_4th(f: &VectorField3, axis: Axis) -> VectorField3 {
    d1(f, axis, StencilOrder::Fourth)
}

/// Second derivative along `axis`. Inactive axes give the zero field.
pub fn d2(f: &VectorField3, axis: Axis, order: StencilOrder) -> VectorField3 {
    let mut out = VectorField3::zeros(f.grid);
    out.time = f.time;
    if f.grid.is_active(axis) {
        accumulate_d2(f, axis, order, 1.0, &mut out);
    }
    out
}

/// Fourth-order second derivative `(-f[-2] + 16 f[-1] - 30 f + 16 f[+1] - f[+2]) / 12h^2`.
pub fn d2_4th(f: &VectorField3, axis: Axis) -> VectorField3 {
    d2(f, axis, StencilOrder::Fourth)
}

/// `out = scale * Laplacian(f)` on the interior; ghosts of `f` must be filled.
pub fn laplacian_into(f: &VectorField3, order: StencilOrder, scale: f64, out: &mut VectorField3) {
    debug_assert_eq!(f.grid, out.grid);
    out.data.iter_mut().for_each(|v| *v = 0.0);
    for axis in Axis::ALL {
        if f.grid.is_active(axis) {
            accumulate_d2(f, axis, order, scale, out);
        }
    }
}

/// Sum of the second-derivative operators over the active axes.
pub fn laplacian(f: &VectorField3, order: StencilOrder) -> VectorField3 {
    let mut out = VectorField3::zeros(f.grid);
    out.time = f.time;
    laplacian_into(f, order, 1.0, &mut out);
    out
}

pub fn laplacian_4th(f: &VectorField3) -> VectorField3 {
    laplacian(f, StencilOrder::Fourth)
}

/// Per cell `sum_axes sum_components (D1 f)^2`; ghosts of `f` must be filled.
pub fn grad_norm_sq(f: &VectorField3, order: StencilOrder) -> ScalarField {
    let mut out = ScalarField::zeros(f.grid);
    let mut work = VectorField3::zeros(f.grid);
    for axis in f.grid.active_axes() {
        write_d1(f, axis, order, &mut work);
        for (acc, v) in out.data.iter_mut().zip(work.cells()) {
            *acc += v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        }
    }
    out
}

/// Discrete error norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    /// Largest absolute component over the interior.
    pub linf: f64,
    /// `sqrt(sum |e|^2 * cell volume)` over the active axes.
    pub l2: f64,
    /// `l2 + sqrt(sum_axes |D1 e|_2^2)`.
    pub h1: f64,
}

/// Cell-volume weighted discrete `l2` norm of the interior.
pub fn l2_norm(f: &VectorField3) -> f64 {
    let w = f.grid.active_cell_volume();
    (f.cells().map(|v| dot(v, v)).sum::<f64>() * w).sqrt()
}

pub fn linf_norm(f: &VectorField3) -> f64 {
    f.cells().flat_map(|v| v.into_iter()).map(f64::abs).fold(0.0, f64::max)
}

/// `linf`, `l2` and `H1` norms of `e`, with fourth-order first differences for the gradient.
pub fn norms(e: &VectorField3) -> Norms {
    norms_with(e, StencilOrder::Fourth)
}

pub fn norms_with(e: &VectorField3, order: StencilOrder) -> Norms {
    let g = e.with_ghosts();
    let l2 = l2_norm(&g);
    let grad = grad_norm_sq(&g, order);
    let semi = (grad.values().iter().sum::<f64>() * e.grid.active_cell_volume()).sqrt();
    Norms {
        linf: linf_norm(&g),
        l2,
        h1: l2 + semi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_field(n: usize, func: impl Fn(f64) -> f64) -> VectorField3 {
        let grid = GridSpec::line(n, 1.0).unwrap();
        VectorField3::from_fn(grid, |x| [func(x[0]), 0.0, 0.0])
    }

    #[test]
    fn spacing_is_length_over_count() {
        let g = GridSpec::new([100, 100, 4], [480.0, 480.0, 20.0]).unwrap();
        assert_eq!(g.spacing(), [4.8, 4.8, 5.0]);
        assert_eq!(g.dim(), 3);
        assert_eq!(GridSpec::line(16, 1.0).unwrap().dim(), 1);
    }

    #[test]
    fn rejects_unfillable_axes() {
        assert!(GridSpec::new([3, 1, 1], [1.0; 3]).is_err());
        assert!(GridSpec::new([0, 1, 1], [1.0; 3]).is_err());
        assert!(GridSpec::new([8, 1, 1], [0.0, 1.0, 1.0]).is_err());
        let err = GridSpec::new([2, 3, 0], [1.0; 3]).unwrap_err();
        match err {
            Error::ConfigList(list) => assert_eq!(list.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_field_has_constant_ghosts() {
        let grid = GridSpec::new([5, 4, 6], [1.0; 3]).unwrap();
        let mut f = VectorField3::zeros(grid);
        f.map_cells(|_| [1.0, 0.0, 0.0]);
        f.apply_neumann_ghost();
        for l in -2..8isize {
            for j in -2..6isize {
                for i in -2..7isize {
                    assert_eq!(f.at(0, i, j, l), 1.0);
                    assert_eq!(f.at(1, i, j, l), 0.0);
                }
            }
        }
    }

    #[test]
    fn ghost_rule_on_ramp() {
        let n = 7;
        let grid = GridSpec::line(n, 1.0).unwrap();
        let mut f = VectorField3::zeros(grid);
        for i in 0..n {
            f.set(i, 0, 0, [(i + 1) as f64, 0.0, 0.0]);
        }
        f.apply_neumann_ghost();
        // 1-based: m(0)=m(1), m(-1)=m(2), m(N+1)=m(N), m(N+2)=m(N-1)
        assert_eq!(f.at(0, -1, 0, 0), 1.0);
        assert_eq!(f.at(0, -2, 0, 0), 2.0);
        assert_eq!(f.at(0, n as isize, 0, 0), n as f64);
        assert_eq!(f.at(0, n as isize + 1, 0, 0), (n - 1) as f64);
    }

    #[test]
    fn ghost_fill_is_idempotent() {
        let grid = GridSpec::new([6, 5, 4], [1.0, 2.0, 3.0]).unwrap();
        let mut f = VectorField3::from_fn(grid, |x| [x[0].sin(), (x[1] * x[2]).cos(), x[0] * x[1]]);
        f.apply_neumann_ghost();
        let once = f.clone();
        f.apply_neumann_ghost();
        assert_eq!(once, f);
    }

    #[test]
    fn inactive_axis_derivatives_are_zero() {
        let f = line_field(8, |x| x * x).with_ghosts();
        assert!(d1_4th(&f, Axis::Y).cells().all(|v| v == [0.0; 3]));
        assert!(d2_4th(&f, Axis::Z).cells().all(|v| v == [0.0; 3]));
    }

    #[test]
    fn constant_derivatives_vanish() {
        let grid = GridSpec::new([6, 6, 6], [1.0; 3]).unwrap();
        let f = VectorField3::uniform(grid, [0.3, -0.2, 0.9]);
        for axis in Axis::ALL {
            assert!(d1_4th(&f, axis).cells().all(|v| v.iter().all(|x| x.abs() < 1e-12)));
            assert!(d2_4th(&f, axis).cells().all(|v| v.iter().all(|x| x.abs() < 1e-12)));
        }
        assert!(laplacian_4th(&f).cells().all(|v| v.iter().all(|x| x.abs() < 1e-12)));
        assert!(grad_norm_sq(&f, StencilOrder::Fourth).values().iter().all(|x| x.abs() < 1e-20));
    }

    #[test]
    fn one_dimensional_laplacian_is_d2() {
        let f = line_field(12, |x| (3.0 * x).sin()).with_ghosts();
        assert_eq!(laplacian_4th(&f), d2_4th(&f, Axis::X));
    }

    #[test]
    fn grad_norm_scales_quadratically() {
        let f = line_field(16, |x| (2.0 * x).cos()).with_ghosts();
        let mut g = f.clone();
        g.scale(2.0);
        let a = grad_norm_sq(&f, StencilOrder::Fourth);
        let b = grad_norm_sq(&g, StencilOrder::Fourth);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((4.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn norms_of_simple_fields() {
        let grid = GridSpec::line(10, 1.0).unwrap();
        let z = norms(&VectorField3::zeros(grid));
        assert_eq!((z.linf, z.l2, z.h1), (0.0, 0.0, 0.0));
        let one = norms(&VectorField3::uniform(grid, [1.0, 0.0, 0.0]));
        assert!((one.linf - 1.0).abs() < 1e-15);
        assert!((one.l2 - 1.0).abs() < 1e-14);
        assert!((one.h1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn flat_round_trip_preserves_interior() {
        let grid = GridSpec::new([4, 5, 1], [1.0; 3]).unwrap();
        let f = VectorField3::from_fn(grid, |x| [x[0], x[1], x[0] * x[1]]);
        let flat = f.flat();
        assert_eq!(flat.len(), 60);
        // component-major, x fastest
        assert_eq!(flat[1], f.get(1, 0, 0)[0]);
        assert_eq!(flat[20 + 4], f.get(0, 1, 0)[1]);
        assert_eq!(VectorField3::from_flat(grid, &flat), f);
    }

    #[test]
    fn mirror_index_matches_rules() {
        assert_eq!(mirror_index(-1, 5), 0);
        assert_eq!(mirror_index(-2, 5), 1);
        assert_eq!(mirror_index(5, 5), 4);
        assert_eq!(mirror_index(6, 5), 3);
        assert_eq!(mirror_index(3, 5), 3);
    }
}
