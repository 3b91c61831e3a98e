//! Stray field from the cell-averaged demagnetization tensor.
//!
//! Near lags use the analytic Newell formulas; distant lags integrate the point-dipole
//! kernel against the cell-pair overlap weight with Gauss-Legendre quadrature, where the
//! Newell expressions would lose digits to cancellation. The convolution runs through a
//! zero-padded FFT; the direct pairwise sum over the same table is kept as an oracle.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::grid::{GridSpec, VectorField3};

/// Component order of the symmetric tensor.
pub const XX: usize = 0;
pub const YY: usize = 1;
pub const ZZ: usize = 2;
pub const XY: usize = 3;
pub const XZ: usize = 4;
pub const YZ: usize = 5;

/// Tensor component coupling field component `a` to magnetization component `b`.
#[inline]
pub fn component(a: usize, b: usize) -> usize {
    match (a.min(b), a.max(b)) {
        (0, 0) => XX,
        (1, 1) => YY,
        (2, 2) => ZZ,
        (0, 1) => XY,
        (0, 2) => XZ,
        _ => YZ,
    }
}

/// Lags farther than this many `V^(1/3)` use the dipole quadrature.
pub const FAR_FIELD_RATIO: f64 = 8.5;

fn asinh_ratio(num: f64, den_sq: f64) -> f64 {
    if den_sq > 0.0 {
        (num / den_sq.sqrt()).asinh()
    } else {
        0.0
    }
}

/// Newell's `f` (even in every argument).
pub fn newell_f(x: f64, y: f64, z: f64) -> f64 {
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut s = 0.0;
    if y > 0.0 {
        s += 0.5 * y * (z2 - x2) * asinh_ratio(y, x2 + z2);
    }
    if z > 0.0 {
        s += 0.5 * z * (y2 - x2) * asinh_ratio(z, x2 + y2);
    }
    if x * r > 0.0 {
        s -= x * y * z * (y * z / (x * r)).atan();
    }
    s + (2.0 * x2 - y2 - z2) * r / 6.0
}

/// Newell's `g` (odd in `x` and `y`, even in `z`).
pub fn newell_g(x: f64, y: f64, z: f64) -> f64 {
    let sign = x.signum() * y.signum();
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut s = 0.0;
    if z > 0.0 {
        s += x * y * z * asinh_ratio(z, x2 + y2);
    }
    s += y / 6.0 * (3.0 * z2 - y2) * asinh_ratio(x, y2 + z2);
    s += x / 6.0 * (3.0 * z2 - x2) * asinh_ratio(y, x2 + z2);
    if z > 0.0 {
        s -= z * z2 / 6.0 * (x * y / (z * r)).atan();
        s -= z * y2 / 2.0 * (x * z / (y * r)).atan();
        s -= z * x2 / 2.0 * (y * z / (x * r)).atan();
    }
    s -= x * y * r / 3.0;
    sign * s
}

const SHIFT_WEIGHT: [f64; 3] = [-1.0, 2.0, -1.0];

fn newell_sum(func: fn(f64, f64, f64) -> f64, r: [f64; 3], d: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for (a, wa) in SHIFT_WEIGHT.iter().enumerate() {
        let x = r[0] + (a as f64 - 1.0) * d[0];
        for (b, wb) in SHIFT_WEIGHT.iter().enumerate() {
            let y = r[1] + (b as f64 - 1.0) * d[1];
            for (c, wc) in SHIFT_WEIGHT.iter().enumerate() {
                let z = r[2] + (c as f64 - 1.0) * d[2];
                s += wa * wb * wc * func(x, y, z);
            }
        }
    }
    s
}

/// Field-from-magnetization tensor between two cells at offset `r` via the Newell formulas.
/// The self term of a cube is `-1/3` on the diagonal.
pub fn newell_tensor(r: [f64; 3], d: [f64; 3]) -> [f64; 6] {
    let pre = -1.0 / (4.0 * PI * d[0] * d[1] * d[2]);
    let [x, y, z] = r;
    let [dx, dy, dz] = d;
    [
        pre * newell_sum(newell_f, [x, y, z], [dx, dy, dz]),
        pre * newell_sum(newell_f, [y, x, z], [dy, dx, dz]),
        pre * newell_sum(newell_f, [z, y, x], [dz, dy, dx]),
        pre * newell_sum(newell_g, [x, y, z], [dx, dy, dz]),
        pre * newell_sum(newell_g, [x, z, y], [dx, dz, dy]),
        pre * newell_sum(newell_g, [y, z, x], [dy, dz, dx]),
    ]
}

const GL5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Nodes and weights of `int_{-d}^{d} (d - |u|) phi(u) du`, five Gauss points per half.
fn tent_rule(d: f64) -> [(f64, f64); 10] {
    let mut out = [(0.0, 0.0); 10];
    for (k, &(xi, w)) in GL5.iter().enumerate() {
        let u = 0.5 * d * (1.0 + xi);
        let wt = 0.5 * d * w * (d - u);
        out[k] = (u, wt);
        out[5 + k] = (-u, wt);
    }
    out
}

/// Same tensor as [`newell_tensor`] from quadrature of the point-dipole kernel; accurate
/// only for lags several cells long.
pub fn dipole_tensor(r: [f64; 3], d: [f64; 3]) -> [f64; 6] {
    let rules = [tent_rule(d[0]), tent_rule(d[1]), tent_rule(d[2])];
    let mut acc = [0.0; 6];
    for &(ux, wx) in &rules[0] {
        let x = r[0] + ux;
        for &(uy, wy) in &rules[1] {
            let y = r[1] + uy;
            for &(uz, wz) in &rules[2] {
                let z = r[2] + uz;
                let r2 = x * x + y * y + z * z;
                let w = wx * wy * wz / (4.0 * PI * r2 * r2 * r2.sqrt());
                acc[XX] += w * (3.0 * x * x - r2);
                acc[YY] += w * (3.0 * y * y - r2);
                acc[ZZ] += w * (3.0 * z * z - r2);
                acc[XY] += w * 3.0 * x * y;
                acc[XZ] += w * 3.0 * x * z;
                acc[YZ] += w * 3.0 * y * z;
            }
        }
    }
    let v = d[0] * d[1] * d[2];
    acc.map(|a| a / v)
}

/// Cell-averaged demagnetization tensor for the cell lag `r` on cells of size `d`.
pub fn demag_tensor(r: [f64; 3], d: [f64; 3]) -> [f64; 6] {
    let dist = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let switch = FAR_FIELD_RATIO * (d[0] * d[1] * d[2]).cbrt();
    if dist > switch {
        dipole_tensor(r, d)
    } else {
        newell_tensor(r, d)
    }
}

/// Parity of each component under a sign flip of the lag along each axis.
#[inline]
fn reflect(t: &[f64; 6], s: [f64; 3]) -> [f64; 6] {
    [t[0], t[1], t[2], t[3] * s[0] * s[1], t[4] * s[0] * s[2], t[5] * s[1] * s[2]]
}

/// Precomputed stray-field convolution for one grid.
pub struct DemagKernel {
    grid: GridSpec,
    padded: [usize; 3],
    /// Tensor at non-negative lags, x fastest over `0..n`.
    table: Vec<[f64; 6]>,
    /// Real spectrum of each tensor component on the padded lattice.
    spectral: [Vec<f64>; 6],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl std::fmt::Debug for DemagKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DemagKernel")
            .field("grid", &self.grid)
            .field("padded", &self.padded)
            .finish()
    }
}

impl DemagKernel {
    pub fn new(grid: GridSpec) -> Result<Self> {
        let n = grid.counts();
        let d = grid.spacing();
        let padded = n.map(|c| if c > 1 { 2 * c } else { 1 });

        let lags: Vec<[usize; 3]> = (0..n[2])
            .flat_map(|l| (0..n[1]).flat_map(move |j| (0..n[0]).map(move |i| [i, j, l])))
            .collect();
        let table: Vec<[f64; 6]> = lags
            .par_iter()
            .map(|&[i, j, l]| demag_tensor([i as f64 * d[0], j as f64 * d[1], l as f64 * d[2]], d))
            .collect();

        let mut planner = FftPlanner::new();
        let forward = padded.map(|p| planner.plan_fft_forward(p));
        let inverse = padded.map(|p| planner.plan_fft_inverse(p));

        let total = padded[0] * padded[1] * padded[2];
        let mut spectral: [Vec<f64>; 6] = Default::default();
        let mut buf = vec![Complex::new(0.0, 0.0); total];
        for (comp, out) in spectral.iter_mut().enumerate() {
            buf.iter_mut().for_each(|v| *v = Complex::new(0.0, 0.0));
            for pz in 0..padded[2] {
                let Some((lz, sz)) = signed_lag(pz, n[2], padded[2]) else { continue };
                for py in 0..padded[1] {
                    let Some((ly, sy)) = signed_lag(py, n[1], padded[1]) else { continue };
                    for px in 0..padded[0] {
                        let Some((lx, sx)) = signed_lag(px, n[0], padded[0]) else { continue };
                        let t = reflect(&table[lx + n[0] * (ly + n[1] * lz)], [sx, sy, sz]);
                        buf[px + padded[0] * (py + padded[1] * pz)] = Complex::new(t[comp], 0.0);
                    }
                }
            }
            fft3(&mut buf, padded, &forward, padded);
            *out = buf.iter().map(|c| c.re).collect();
        }

        Ok(Self {
            grid,
            padded,
            table,
            spectral,
            forward,
            inverse,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn padded_dims(&self) -> [usize; 3] {
        self.padded
    }

    /// Real-space tensor at the signed cell lag `(target - source)`.
    pub fn tensor_at(&self, lag: [isize; 3]) -> [f64; 6] {
        let n = self.grid.counts();
        let a = lag.map(|v| v.unsigned_abs());
        let t = &self.table[a[0] + n[0] * (a[1] + n[1] * a[2])];
        reflect(t, lag.map(|v| if v < 0 { -1.0 } else { 1.0 }))
    }

    /// Stray field of `m` by FFT convolution; ghosts of the result are zero.
    pub fn stray_field(&self, m: &VectorField3) -> Result<VectorField3> {
        self.grid.ensure_same(m.grid())?;
        let mut out = VectorField3::zeros(self.grid);
        out.time = m.time;
        self.stray_field_into(m, &mut out);
        Ok(out)
    }

    /// FFT convolution into `out` (interior only). Grids must match.
    ///
    /// `mx + i my` share one transform and are separated by Hermitian symmetry; the
    /// outputs `hx + i hy` share the inverse.
    pub fn stray_field_into(&self, m: &VectorField3, out: &mut VectorField3) {
        let n = self.grid.counts();
        let p = self.padded;
        let total = p[0] * p[1] * p[2];
        let zero = Complex::new(0.0, 0.0);
        let mut a = vec![zero; total];
        let mut b = vec![zero; total];
        for l in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let v = m.get(i, j, l);
                    let k = i + p[0] * (j + p[1] * l);
                    a[k] = Complex::new(v[0], v[1]);
                    b[k] = Complex::new(v[2], 0.0);
                }
            }
        }
        fft3(&mut a, p, &self.forward, n);
        fft3(&mut b, p, &self.forward, n);

        let s = &self.spectral;
        let neg = |q: usize, len: usize| if q == 0 { 0 } else { len - q };
        let mut c = vec![zero; total];
        for z in 0..p[2] {
            let zn = neg(z, p[2]);
            for y in 0..p[1] {
                let yn = neg(y, p[1]);
                for x in 0..p[0] {
                    let idx = x + p[0] * (y + p[1] * z);
                    let mirror = neg(x, p[0]) + p[0] * (yn + p[1] * zn);
                    let (av, am) = (a[idx], a[mirror].conj());
                    let mx = (av + am) * 0.5;
                    let my = (av - am) * Complex::new(0.0, -0.5);
                    let mz = b[idx];
                    let hx = mx * s[XX][idx] + my * s[XY][idx] + mz * s[XZ][idx];
                    let hy = mx * s[XY][idx] + my * s[YY][idx] + mz * s[YZ][idx];
                    let hz = mx * s[XZ][idx] + my * s[YZ][idx] + mz * s[ZZ][idx];
                    c[idx] = hx + Complex::new(-hy.im, hy.re);
                    b[idx] = hz;
                }
            }
        }

        let scale = 1.0 / total as f64;
        ifft3(&mut c, p, &self.inverse, n);
        ifft3(&mut b, p, &self.inverse, n);
        for l in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let k = i + p[0] * (j + p[1] * l);
                    out.set(i, j, l, [c[k].re * scale, c[k].im * scale, b[k].re * scale]);
                }
            }
        }
    }

    /// Direct `O(N^2)` pairwise summation over the same tensor table.
    pub fn stray_field_direct(&self, m: &VectorField3) -> Result<VectorField3> {
        self.grid.ensure_same(m.grid())?;
        let g = self.grid;
        let cells: Vec<[f64; 3]> = m.cells().collect();
        let mut out = VectorField3::zeros(g);
        out.time = m.time;
        m.for_each_cell(|i, j, l, _| {
            let mut h = [0.0; 3];
            for (src, mv) in cells.iter().enumerate() {
                let (si, sj, sl) = g.cell_coords(src);
                let t = self.tensor_at([
                    i as isize - si as isize,
                    j as isize - sj as isize,
                    l as isize - sl as isize,
                ]);
                h[0] += t[XX] * mv[0] + t[XY] * mv[1] + t[XZ] * mv[2];
                h[1] += t[XY] * mv[0] + t[YY] * mv[1] + t[YZ] * mv[2];
                h[2] += t[XZ] * mv[0] + t[YZ] * mv[1] + t[ZZ] * mv[2];
            }
            out.set(i, j, l, h);
        });
        Ok(out)
    }
}

/// Maps a padded index to `(|lag|, sign)`; `None` for the unused slot at lag `n`.
fn signed_lag(p: usize, n: usize, padded: usize) -> Option<(usize, f64)> {
    if padded == 1 {
        Some((0, 1.0))
    } else if p < n {
        Some((p, 1.0))
    } else if p == n {
        None
    } else {
        Some((padded - p, -1.0))
    }
}

/// Batched transform of all lines along `axis` whose other coordinates lie inside `extent`.
fn lines(buf: &mut [Complex<f64>], p: [usize; 3], axis: usize, extent: [usize; 3], fft: &Arc<dyn Fft<f64>>) {
    if p[axis] == 1 {
        return;
    }
    let len = p[axis];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    match axis {
        0 => {
            for z in 0..extent[2] {
                let start = p[0] * p[1] * z;
                let block = &mut buf[start..start + p[0] * extent[1]];
                fft.process_with_scratch(block, &mut scratch);
            }
        }
        1 => {
            let mut tmp = vec![Complex::new(0.0, 0.0); len * extent[0]];
            for z in 0..extent[2] {
                let base = p[0] * p[1] * z;
                for y in 0..len {
                    for x in 0..extent[0] {
                        tmp[x * len + y] = buf[base + x + p[0] * y];
                    }
                }
                fft.process_with_scratch(&mut tmp, &mut scratch);
                for y in 0..len {
                    for x in 0..extent[0] {
                        buf[base + x + p[0] * y] = tmp[x * len + y];
                    }
                }
            }
        }
        _ => {
            let plane = p[0] * p[1];
            let mut tmp = vec![Complex::new(0.0, 0.0); len * extent[0]];
            for y in 0..extent[1] {
                for z in 0..len {
                    for x in 0..extent[0] {
                        tmp[x * len + z] = buf[x + p[0] * y + plane * z];
                    }
                }
                fft.process_with_scratch(&mut tmp, &mut scratch);
                for z in 0..len {
                    for x in 0..extent[0] {
                        buf[x + p[0] * y + plane * z] = tmp[x * len + z];
                    }
                }
            }
        }
    }
}

/// Forward 3D transform of data supported on `support` (lower corner of the padded box).
fn fft3(buf: &mut [Complex<f64>], p: [usize; 3], plans: &[Arc<dyn Fft<f64>>; 3], support: [usize; 3]) {
    lines(buf, p, 0, [p[0], support[1], support[2]], &plans[0]);
    lines(buf, p, 1, [p[0], p[1], support[2]], &plans[1]);
    lines(buf, p, 2, [p[0], p[1], p[2]], &plans[2]);
}

/// Unnormalized inverse transform, only computing the lines that reach `keep`.
fn ifft3(buf: &mut [Complex<f64>], p: [usize; 3], plans: &[Arc<dyn Fft<f64>>; 3], keep: [usize; 3]) {
    lines(buf, p, 2, [p[0], p[1], p[2]], &plans[2]);
    lines(buf, p, 1, [p[0], p[1], keep[2]], &plans[1]);
    lines(buf, p, 0, [p[0], keep[1], keep[2]], &plans[0]);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct_sum() {
        let g = GridSpec::new([6, 5, 4], [6.0, 4.0, 5.0]).unwrap();
        let kern = DemagKernel::new(g).unwrap();
        let m = VectorField3::from_fn(g, |x| [(x[0] * 1.3).sin(), (x[1] - x[2]).cos(), 0.3 * x[0] * x[1] - 1.0]);
        let fast = kern.stray_field(&m).unwrap();
        let slow = kern.stray_field_direct(&m).unwrap();
        let scale = slow.cells().flat_map(|v| v.into_iter()).fold(0.0f64, |a, v| a.max(v.abs()));
        for (u, v) in fast.cells().zip(slow.cells()) {
            for c in 0..3 {
                assert!((u[c] - v[c]).abs() <= 1e-12 * scale, "{u:?} {v:?}");
            }
        }
    }

    #[test]
    fn cube_self_term() {
        let t = newell_tensor([0.0; 3], [1.0; 3]);
        for c in 0..3 {
            assert!((t[c] + 1.0 / 3.0).abs() < 1e-12, "{t:?}");
        }
        for c in 3..6 {
            assert!(t[c].abs() < 1e-14);
        }
    }

    #[test]
    fn trace_of_self_term_is_minus_one() {
        let t = newell_tensor([0.0; 3], [1.0, 0.7, 2.3]);
        assert!((t[0] + t[1] + t[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_newell_at_moderate_range() {
        for d in [[1.0, 1.0, 1.0], [4.8, 4.8, 5.0], [6.25, 1.5625, 1.0]] {
            let v: f64 = d[0] * d[1] * d[2];
            let dist = FAR_FIELD_RATIO * v.cbrt();
            for dir in [[1.0, 0.0, 0.0], [0.6, 0.8, 0.0], [0.48, 0.6, 0.64], [0.0, 0.0, 1.0]] {
                let r = dir.map(|c: f64| c * dist);
                let a = newell_tensor(r, d);
                let b = dipole_tensor(r, d);
                let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
                for c in 0..6 {
                    assert!((a[c] - b[c]).abs() < 1e-6 * scale, "{d:?} {r:?} {a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn g_parity() {
        let (x, y, z) = (0.3, 1.7, -0.4);
        assert_eq!(newell_g(-x, y, z), -newell_g(x, y, z));
        assert_eq!(newell_g(x, -y, z), -newell_g(x, y, z));
        assert_eq!(newell_g(x, y, -z), newell_g(x, y, z));
    }
}
