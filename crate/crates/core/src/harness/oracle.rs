//! Small-grid self checks: FFT stray field against direct summation, matrix-free operator
//! against its dense assembly, GMRES round trip.

use serde::Serialize;

use crate::demag::DemagKernel;
use crate::error::Result;
use crate::grid::{GridSpec, StencilOrder, VectorField3};
use crate::krylov::{assemble_dense, gmres_solve, GmresSettings, ImplicitOperator, LinearOperator, OperatorForm};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub error: f64,
    pub tol: f64,
    pub pass: bool,
}

impl OracleCheck {
    fn new(name: impl Into<String>, error: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            error,
            tol,
            pass: error <= tol,
        }
    }
}

/// Deterministic values in `[-0.5, 0.5)`.
pub fn lcg_sequence(seed: u64) -> impl FnMut() -> f64 {
    let mut s = seed;
    move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }
}

pub fn random_field(grid: GridSpec, seed: u64) -> VectorField3 {
    let mut next = lcg_sequence(seed);
    VectorField3::from_fn(grid, |_| [next(), next(), next()])
}

pub fn random_unit_field(grid: GridSpec, seed: u64) -> VectorField3 {
    let mut m = random_field(grid, seed);
    m.map_cells(|v| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    });
    m
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Relative max-norm gap between the FFT and direct stray fields of a random state.
pub fn stray_fft_vs_direct(counts: [usize; 3], lengths: [f64; 3], seed: u64) -> Result<f64> {
    let grid = GridSpec::new(counts, lengths)?;
    let kernel = DemagKernel::new(grid)?;
    let m = random_unit_field(grid, seed);
    let fft = kernel.stray_field(&m)?.flat();
    let direct = kernel.stray_field_direct(&m)?.flat();
    Ok(max_abs_diff(&fft, &direct) / max_abs(&direct))
}

/// Largest deviation of a single cube's self field from `-m/3`.
pub fn cube_self_demag() -> Result<f64> {
    let grid = GridSpec::new([1, 1, 1], [1.0, 1.0, 1.0])?;
    let kernel = DemagKernel::new(grid)?;
    let mut err: f64 = 0.0;
    for a in 0..3 {
        let mut v = [0.0; 3];
        v[a] = 1.0;
        let h = kernel.stray_field(&VectorField3::uniform(grid, v))?.get(0, 0, 0);
        for (b, hb) in h.iter().enumerate() {
            let want = if a == b { -1.0 / 3.0 } else { 0.0 };
            err = err.max((hb - want).abs());
        }
    }
    Ok(err)
}

/// Relative deviation of the mean field of a uniformly magnetized `n^3` cube from `-m/3`.
pub fn uniform_cube_average(n: usize) -> Result<f64> {
    let grid = GridSpec::cube(n, 1.0)?;
    let kernel = DemagKernel::new(grid)?;
    let h = kernel.stray_field(&VectorField3::uniform(grid, [1.0, 0.0, 0.0]))?;
    let cells = grid.cell_count() as f64;
    let mean: [f64; 3] = h
        .cells()
        .fold([0.0; 3], |a, v| [a[0] + v[0], a[1] + v[1], a[2] + v[2]])
        .map(|s| s / cells);
    let third = 1.0 / 3.0;
    Ok(((mean[0] + third).abs() + mean[1].abs() + mean[2].abs()) / third)
}

fn test_operator(grid: GridSpec, form: OperatorForm, order: StencilOrder, seed: u64) -> ImplicitOperator {
    let mhat = random_unit_field(grid, seed);
    ImplicitOperator::new(11.0 / 6.0, 0.01, 1.0, 0.5, form, order, &mhat)
}

/// Relative gap between matrix-free and dense application on a random vector.
pub fn operator_vs_dense(grid: GridSpec, form: OperatorForm, order: StencilOrder, seed: u64) -> f64 {
    let op = test_operator(grid, form, order, seed);
    let n = op.len();
    let a = assemble_dense(&op);
    let mut next = lcg_sequence(seed + 1);
    let x: Vec<f64> = (0..n).map(|_| next()).collect();
    let mut y = vec![0.0; n];
    op.apply(&x, &mut y);
    let dense: Vec<f64> = a.iter().map(|row| row.iter().zip(&x).map(|(r, v)| r * v).sum()).collect();
    max_abs_diff(&y, &dense) / max_abs(&dense)
}

/// Relative error of GMRES recovering a random `x*` from `A x*`.
pub fn gmres_round_trip(grid: GridSpec, form: OperatorForm, seed: u64, settings: &GmresSettings) -> Result<f64> {
    let op = test_operator(grid, form, StencilOrder::Fourth, seed);
    let n = op.len();
    let mut next = lcg_sequence(seed + 7);
    let xs: Vec<f64> = (0..n).map(|_| next()).collect();
    let mut b = vec![0.0; n];
    op.apply(&xs, &mut b);
    let (x, _) = gmres_solve(&op, None, &b, &vec![0.0; n], settings)?;
    let num: f64 = x.iter().zip(&xs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(num / den)
}

/// Every check with its pass threshold.
pub fn run_oracles() -> Result<Vec<OracleCheck>> {
    let mut out = vec![
        OracleCheck::new(
            "stray field: FFT vs direct sum, 6x5x4",
            stray_fft_vs_direct([6, 5, 4], [1.2, 1.0, 0.8], 11)?,
            1e-10,
        ),
        OracleCheck::new("stray field: single cube self field -m/3", cube_self_demag()?, 1e-10),
        OracleCheck::new("stray field: uniform 8^3 cube mean -m/3", uniform_cube_average(8)?, 0.02),
    ];
    let grids = [
        ("1d 8 cells", GridSpec::line(8, 1.0)?),
        ("3d 5x4x4", GridSpec::new([5, 4, 4], [1.0, 0.8, 0.8])?),
    ];
    for (label, grid) in grids {
        for form in [OperatorForm::Gilbert, OperatorForm::Existing] {
            for order in [StencilOrder::Second, StencilOrder::Fourth] {
                out.push(OracleCheck::new(
                    format!("operator: matrix-free vs dense, {label}, {form:?}, {}", order.name()),
                    operator_vs_dense(grid, form, order, 5),
                    1e-12,
                ));
            }
        }
        let settings = GmresSettings::default().with_tol(1e-10);
        for form in [OperatorForm::Gilbert, OperatorForm::Existing] {
            out.push(OracleCheck::new(
                format!("gmres: round trip, {label}, {form:?}"),
                gmres_round_trip(grid, form, 9, &settings)?,
                10.0 * settings.tol,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_oracles_pass() {
        for c in run_oracles().unwrap() {
            assert!(c.pass, "{}: {:e} > {:e}", c.name, c.error, c.tol);
        }
    }
}
