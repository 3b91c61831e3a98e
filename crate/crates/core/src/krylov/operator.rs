use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use super::{BandedLu, LinearOperator, Preconditioner};
use crate::error::Result;
use crate::grid::{cross, laplacian_into, mirror_index, Axis, GridSpec, StencilOrder, VectorField3};

/// Structure of the implicit part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorForm {
    /// `c0 x + k m x (eps Lap x) + k alpha m x (m x eps Lap x)`
    Gilbert,
    /// `c0 x + k m x (eps Lap x) - k alpha eps Lap x`
    Existing,
}

/// Matrix-free implicit operator with a frozen extrapolated magnetization.
pub struct ImplicitOperator {
    pub c0: f64,
    pub k: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub form: OperatorForm,
    pub order: StencilOrder,
    grid: GridSpec,
    mhat: Vec<[f64; 3]>,
    work: RefCell<Work>,
}

struct Work {
    x: VectorField3,
    lap: VectorField3,
    flat: Vec<f64>,
}

impl ImplicitOperator {
    pub fn new(
        c0: f64,
        k: f64,
        epsilon: f64,
        alpha: f64,
        form: OperatorForm,
        order: StencilOrder,
        mhat: &VectorField3,
    ) -> Self {
        let grid = *mhat.grid();
        Self {
            c0,
            k,
            epsilon,
            alpha,
            form,
            order,
            grid,
            mhat: mhat.cells().collect(),
            work: RefCell::new(Work {
                x: VectorField3::zeros(grid),
                lap: VectorField3::zeros(grid),
                flat: vec![0.0; 3 * grid.cell_count()],
            }),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Field-valued application (ghosts of `x` are refreshed internally).
    pub fn apply_field(&self, x: &VectorField3) -> VectorField3 {
        let xf = x.flat();
        let mut y = vec![0.0; xf.len()];
        self.apply(&xf, &mut y);
        VectorField3::from_flat(self.grid, &y)
    }
}

impl LinearOperator for ImplicitOperator {
    fn len(&self) -> usize {
        3 * self.grid.cell_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut guard = self.work.borrow_mut();
        let w = &mut *guard;
        w.x.copy_from_flat(x);
        w.x.apply_neumann_ghost();
        laplacian_into(&w.x, self.order, self.k * self.epsilon, &mut w.lap);
        w.lap.to_flat(&mut w.flat);
        let n = self.grid.cell_count();
        let lf = &w.flat;
        for (idx, m) in self.mhat.iter().enumerate() {
            let l = [lf[idx], lf[n + idx], lf[2 * n + idx]];
            let t = cross(*m, l);
            let v = match self.form {
                OperatorForm::Gilbert => {
                    let u = cross(*m, t);
                    [t[0] + self.alpha * u[0], t[1] + self.alpha * u[1], t[2] + self.alpha * u[2]]
                }
                OperatorForm::Existing => [
                    t[0] - self.alpha * l[0],
                    t[1] - self.alpha * l[1],
                    t[2] - self.alpha * l[2],
                ],
            };
            for c in 0..3 {
                y[c * n + idx] = self.c0 * x[c * n + idx] + v[c];
            }
        }
    }
}

/// Sparse rows of the one-dimensional second difference with the mirror closure.
pub(crate) fn neumann_d2_rows(n: usize, h: f64, order: StencilOrder) -> Vec<Vec<(usize, f64)>> {
    let inv = 1.0 / (h * h);
    (0..n)
        .map(|i| {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for &(o, w) in order.d2_taps() {
                let col = mirror_index(i as isize + o, n);
                match row.iter_mut().find(|(c, _)| *c == col) {
                    Some(e) => e.1 += w * inv,
                    None => row.push((col, w * inv)),
                }
            }
            row
        })
        .collect()
}

/// Exact solve of the implicit operator restricted to grid lines along the axis with
/// the smallest mesh size; the other axes keep only their diagonal Laplacian weight.
/// In one dimension this is the exact inverse.
#[derive(Clone, Debug)]
pub struct LinePreconditioner {
    axis: Axis,
    lines: Vec<(Vec<usize>, BandedLu)>,
    cells: usize,
}

impl LinePreconditioner {
    pub fn new(op: &ImplicitOperator) -> Result<Self> {
        let grid = op.grid;
        let axis = grid
            .active_axes()
            .min_by(|a, b| grid.h(*a).total_cmp(&grid.h(*b)))
            .unwrap_or(Axis::X);
        let n = grid.counts();
        let rows: Vec<Vec<Vec<(usize, f64)>>> = Axis::ALL
            .iter()
            .map(|&a| {
                if grid.is_active(a) {
                    neumann_d2_rows(n[a.index()], grid.h(a), op.order)
                } else {
                    Vec::new()
                }
            })
            .collect();
        let reach = match op.order {
            StencilOrder::Second => 1,
            StencilOrder::Fourth => 2,
        };
        let band = 3 * reach + 2;
        let ke = op.k * op.epsilon;
        let s = axis.index();
        let ns = n[s];
        let (oa, ob) = ((s + 1) % 3, (s + 2) % 3);

        let mut lines = Vec::with_capacity(grid.cell_count() / ns);
        for qb in 0..n[ob] {
            for qa in 0..n[oa] {
                let mut cells = Vec::with_capacity(ns);
                for i in 0..ns {
                    let mut pos = [0usize; 3];
                    pos[s] = i;
                    pos[oa] = qa;
                    pos[ob] = qb;
                    cells.push(grid.cell_index(pos[0], pos[1], pos[2]));
                }
                let mut lu = BandedLu::zeros(3 * ns, band, band);
                for (i, &cell) in cells.iter().enumerate() {
                    let mop = coupling_block(op.mhat[cell], op.alpha, op.form);
                    let mut pos = [0usize; 3];
                    pos[s] = i;
                    pos[oa] = qa;
                    pos[ob] = qb;
                    let mut diag_w = 0.0;
                    for a in [oa, ob] {
                        if !rows[a].is_empty() {
                            let p = pos[a];
                            diag_w += rows[a][p].iter().find(|(c, _)| *c == p).map_or(0.0, |e| e.1);
                        }
                    }
                    for c in 0..3 {
                        lu.add(3 * i + c, 3 * i + c, op.c0);
                    }
                    let mut add_block = |j: usize, w: f64| {
                        for a in 0..3 {
                            for b in 0..3 {
                                let v = ke * w * mop[a][b];
                                if v != 0.0 {
                                    lu.add(3 * i + a, 3 * j + b, v);
                                }
                            }
                        }
                    };
                    if diag_w != 0.0 {
                        add_block(i, diag_w);
                    }
                    if !rows[s].is_empty() {
                        for &(j, w) in &rows[s][i] {
                            add_block(j, w);
                        }
                    }
                }
                lu.factor()?;
                lines.push((cells, lu));
            }
        }
        Ok(Self {
            axis,
            lines,
            cells: grid.cell_count(),
        })
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }
}

/// Block multiplying `eps Lap x` at one cell: `M + alpha M^2` or `M - alpha I`, with `M v = m x v`.
fn coupling_block(m: [f64; 3], alpha: f64, form: OperatorForm) -> [[f64; 3]; 3] {
    let cx = [[0.0, -m[2], m[1]], [m[2], 0.0, -m[0]], [-m[1], m[0], 0.0]];
    let mut out = cx;
    match form {
        OperatorForm::Gilbert => {
            let mm = m[0] * m[0] + m[1] * m[1] + m[2] * m[2];
            for a in 0..3 {
                for b in 0..3 {
                    let sq = m[a] * m[b] - if a == b { mm } else { 0.0 };
                    out[a][b] += alpha * sq;
                }
            }
        }
        OperatorForm::Existing => {
            for (a, row) in out.iter_mut().enumerate() {
                row[a] -= alpha;
            }
        }
    }
    out
}

impl Preconditioner for LinePreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.cells;
        let mut buf = Vec::new();
        for (cells, lu) in &self.lines {
            buf.clear();
            for &cell in cells {
                buf.extend_from_slice(&[r[cell], r[n + cell], r[2 * n + cell]]);
            }
            lu.solve(&mut buf);
            for (i, &cell) in cells.iter().enumerate() {
                z[cell] = buf[3 * i];
                z[n + cell] = buf[3 * i + 1];
                z[2 * n + cell] = buf[3 * i + 2];
            }
        }
    }
}

/// Dense matrix of `op` assembled column by column from basis vectors (row-major).
pub fn assemble_dense(op: &dyn LinearOperator) -> Vec<Vec<f64>> {
    let n = op.len();
    let mut a = vec![vec![0.0; n]; n];
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        for i in 0..n {
            a[i][j] = col[i];
        }
        e[j] = 0.0;
    }
    a
}

/// Dense LU solve; `None` when the matrix is singular.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let rhs = nalgebra::DVector::from_column_slice(b);
    m.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn random_field(grid: GridSpec, seed: u64) -> VectorField3 {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        VectorField3::from_fn(grid, |_| [next(), next(), next()])
    }

    #[test]
    fn uniform_input_is_scaled_by_c0() {
        let grid = GridSpec::new([6, 5, 4], [1.0, 1.0, 1.0]).unwrap();
        let mhat = random_field(grid, 3);
        let op = ImplicitOperator::new(11.0 / 6.0, 0.1, 1.0, 0.5, OperatorForm::Gilbert, StencilOrder::Fourth, &mhat);
        let x = VectorField3::uniform(grid, [0.2, -0.4, 0.9]);
        let y = op.apply_field(&x);
        for v in y.cells() {
            assert!((v[0] - 11.0 / 6.0 * 0.2).abs() < 1e-12);
            assert!((v[2] - 11.0 / 6.0 * 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn line_preconditioner_is_exact_in_1d() {
        for form in [OperatorForm::Gilbert, OperatorForm::Existing] {
            for order in [StencilOrder::Second, StencilOrder::Fourth] {
                let grid = GridSpec::line(9, 1.0).unwrap();
                let mhat = random_field(grid, 11);
                let op = ImplicitOperator::new(1.5, 0.01, 1.0, 0.3, form, order, &mhat);
                let pc = LinePreconditioner::new(&op).unwrap();
                let x = random_field(grid, 5).flat();
                let mut b = vec![0.0; x.len()];
                op.apply(&x, &mut b);
                let mut z = vec![0.0; x.len()];
                pc.apply(&b, &mut z);
                for (u, v) in z.iter().zip(&x) {
                    assert!((u - v).abs() < 1e-11, "{form:?} {order:?}: {u} {v}");
                }
            }
        }
    }

    #[test]
    fn d2_rows_match_closure() {
        let rows = neumann_d2_rows(6, 1.0, StencilOrder::Fourth);
        let w: Vec<f64> = (0..3).map(|c| rows[0].iter().find(|e| e.0 == c).unwrap().1 * 12.0).collect();
        assert!((w[0] + 14.0).abs() < 1e-12 && (w[1] - 15.0).abs() < 1e-12 && (w[2] + 1.0).abs() < 1e-12);
        for r in &rows {
            assert!(r.iter().map(|e| e.1).sum::<f64>().abs() < 1e-12);
        }
    }
}
