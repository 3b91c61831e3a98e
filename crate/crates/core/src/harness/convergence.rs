//! Manufactured-solution accuracy studies and the CPU-time sweep.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::manufactured::ManufacturedSolution;
use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::grid::{d1, Norms, StencilOrder, VectorField3};
use crate::integrators::{SchemeConfig, SchemeKind, SchemeState};
use crate::krylov::GmresSettings;
use crate::material::MaterialParams;

/// Damping of every accuracy study.
pub const MMS_ALPHA: f64 = 0.01;
/// Final time of every accuracy study.
pub const MMS_T: f64 = 0.1;
/// Linear-solver tolerance of the temporal studies.
pub const MMS_TOL: f64 = 1e-10;
/// Linear-solver tolerance of the spatial studies. Their `1e5` steps would otherwise accept the
/// extrapolated guess unchanged and accumulate its residual.
pub const MMS_SPATIAL_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Vary `k`.
    Temporal,
    /// Vary `h` at a tiny fixed `k`.
    Spatial,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Temporal => "temporal",
            Mode::Spatial => "spatial",
        }
    }
}

/// One manufactured run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedCase {
    pub scheme: SchemeKind,
    pub dim: usize,
    /// Cells per active axis.
    pub n: usize,
    pub k: f64,
    pub t_final: f64,
    pub alpha: f64,
    pub order: StencilOrder,
    pub solver: GmresSettings,
    pub precondition: bool,
}

impl ManufacturedCase {
    pub fn new(scheme: SchemeKind, dim: usize, n: usize, k: f64) -> Self {
        Self {
            scheme,
            dim,
            n,
            k,
            t_final: MMS_T,
            alpha: MMS_ALPHA,
            order: scheme.default_order(),
            solver: GmresSettings::default().with_tol(MMS_TOL),
            precondition: true,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.k).round() as usize
    }
}

/// Errors of one run at the final time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub k: f64,
    pub h: f64,
    pub n: usize,
    pub steps: usize,
    pub linf: f64,
    pub l2: f64,
    pub h1: f64,
    pub cpu_seconds: f64,
    pub mean_gmres_iterations: f64,
    pub max_gmres_iterations: usize,
    pub max_unit_deviation: f64,
}

/// Least-squares slopes of `log(error)` against `log(k)` or `log(h)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orders {
    pub linf: f64,
    pub l2: f64,
    pub h1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scheme: SchemeKind,
    pub mode: Mode,
    pub dim: usize,
    pub alpha: f64,
    pub t_final: f64,
    pub rows: Vec<ErrorRow>,
    /// `None` with fewer than two rows.
    pub orders: Option<Orders>,
}

/// Slope of the least-squares line through `(ln x, ln y)`; `None` below two points.
pub fn fit_order(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

impl ConvergenceReport {
    pub fn new(scheme: SchemeKind, mode: Mode, dim: usize, alpha: f64, t_final: f64, rows: Vec<ErrorRow>) -> Self {
        let x: Vec<f64> = rows
            .iter()
            .map(|r| match mode {
                Mode::Temporal => r.k,
                Mode::Spatial => r.h,
            })
            .collect();
        let col = |f: fn(&ErrorRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        let orders = match (
            fit_order(&x, &col(|r| r.linf)),
            fit_order(&x, &col(|r| r.l2)),
            fit_order(&x, &col(|r| r.h1)),
        ) {
            (Some(linf), Some(l2), Some(h1)) => Some(Orders { linf, l2, h1 }),
            _ => None,
        };
        Self {
            scheme,
            mode,
            dim,
            alpha,
            t_final,
            rows,
            orders,
        }
    }
}

/// Discrete errors of `m` against the exact solution at time `t`.
///
/// `h1` is the `l2` error plus the `l2` norm of the difference between the discrete
/// gradient of `m` (stencil `order`) and the exact gradient.
pub fn manufactured_error(ms: &ManufacturedSolution, m: &VectorField3, t: f64, order: StencilOrder) -> Norms {
    let grid = *m.grid();
    let w = grid.active_cell_volume();
    let mut linf: f64 = 0.0;
    let mut sq = 0.0;
    m.for_each_cell(|i, j, l, _| {
        let v = m.get(i, j, l);
        let e = ms.exact(grid.cell_center(i, j, l), t);
        for c in 0..3 {
            let d = v[c] - e[c];
            linf = linf.max(d.abs());
            sq += d * d;
        }
    });
    let l2 = (sq * w).sqrt();
    let g = m.with_ghosts();
    let mut gsq = 0.0;
    for axis in grid.active_axes() {
        let da = d1(&g, axis, order);
        da.for_each_cell(|i, j, l, _| {
            let v = da.get(i, j, l);
            let e = ms.gradient(grid.cell_center(i, j, l), t)[axis.index()];
            for c in 0..3 {
                gsq += (v[c] - e[c]) * (v[c] - e[c]);
            }
        });
    }
    Norms {
        linf,
        l2,
        h1: l2 + (gsq * w).sqrt(),
    }
}

/// Runs one manufactured case from exact history to `t_final`.
pub fn run_manufactured(case: &ManufacturedCase) -> Result<ErrorRow> {
    let start = Instant::now();
    let ms = ManufacturedSolution::new(case.dim, case.alpha);
    let grid = ms.grid(case.n)?;
    let model = FieldModel::new(MaterialParams::dimensionless(1.0, 0.0, case.alpha), grid)?;
    let total = case.steps();
    let depth = case.scheme.depth();
    if total + 1 < depth {
        return Err(Error::Config(format!(
            "{} steps cannot cover the {depth}-level history",
            total
        )));
    }
    let cfg = SchemeConfig {
        kind: case.scheme,
        k: case.k,
        order: case.order,
        solver: case.solver,
        precondition: case.precondition,
        precond_every: 1,
        mf_sign: Default::default(),
    };
    let mut st = SchemeState::bootstrap_exact(cfg, &model, grid, 0.0, |x, t| ms.exact(x, t))?;
    for _ in depth - 1..total {
        st.step(&model, Some(&ms))?;
    }
    let t = st.time();
    let e = manufactured_error(&ms, &st.newest().m, t, case.order);
    let cpu_seconds = start.elapsed().as_secs_f64();
    Ok(ErrorRow {
        k: case.k,
        h: grid.spacing()[0],
        n: case.n,
        steps: total,
        linf: e.linf,
        l2: e.l2,
        h1: e.h1,
        cpu_seconds,
        mean_gmres_iterations: st.totals.mean_iterations(),
        max_gmres_iterations: st.totals.max_iterations,
        max_unit_deviation: st.max_unit_deviation,
    })
}

/// Step divisors `N0` (`k = T / N0`) of the temporal studies.
pub fn temporal_divisors(scheme: SchemeKind, dim: usize) -> Vec<usize> {
    if dim == 1 {
        return vec![8, 12, 16, 24, 32];
    }
    match scheme {
        SchemeKind::Bdf1 => vec![40, 57, 78, 102, 129],
        SchemeKind::Bdf2Sipm => vec![2, 3, 4, 5, 6],
        _ => vec![6, 7, 8, 9, 11],
    }
}

/// Cases of a temporal study: 1D at `h = 1e-4`; 3D with `h` tied to `k` by the scheme order
/// (`k = h^2`, `k = h`, `k = h^(4/3)`).
pub fn temporal_cases(scheme: SchemeKind, dim: usize) -> Vec<ManufacturedCase> {
    temporal_divisors(scheme, dim)
        .into_iter()
        .map(|d| {
            let k = MMS_T / d as f64;
            let n = if dim == 1 {
                10_000
            } else {
                let h = match scheme {
                    SchemeKind::Bdf1 => k.sqrt(),
                    SchemeKind::Bdf2Sipm => k,
                    _ => k.powf(0.75),
                };
                ((1.0 / h).round() as usize).max(4)
            };
            ManufacturedCase::new(scheme, dim, n, k)
        })
        .collect()
}

/// Cases of a spatial study: 1D `k = 1e-6`, `h = 1/16 .. 1/64`; 3D `k = 1e-5`, `h = 1/4 .. 1/12`.
pub fn spatial_cases(scheme: SchemeKind, dim: usize) -> Vec<ManufacturedCase> {
    let (k, ns): (f64, &[usize]) = if dim == 1 {
        (1e-6, &[16, 24, 32, 48, 64])
    } else {
        (1e-5, &[4, 6, 8, 10, 12])
    };
    ns.iter()
        .map(|&n| {
            let mut c = ManufacturedCase::new(scheme, dim, n, k);
            c.solver.tol = MMS_SPATIAL_TOL;
            c
        })
        .collect()
}

pub fn run_cases(scheme: SchemeKind, mode: Mode, dim: usize, cases: &[ManufacturedCase]) -> Result<ConvergenceReport> {
    let mut rows = Vec::with_capacity(cases.len());
    for case in cases {
        let row = run_manufactured(case)?;
        log::info!(
            "{} {} dim={} n={} k={:.3e}: linf={:.4e} l2={:.4e} h1={:.4e} ({:.2}s)",
            scheme,
            mode.name(),
            dim,
            case.n,
            case.k,
            row.linf,
            row.l2,
            row.h1,
            row.cpu_seconds
        );
        rows.push(row);
    }
    let (alpha, t_final) = cases.first().map_or((MMS_ALPHA, MMS_T), |c| (c.alpha, c.t_final));
    Ok(ConvergenceReport::new(scheme, mode, dim, alpha, t_final, rows))
}

pub fn run_temporal_convergence(scheme: SchemeKind, dim: usize) -> Result<ConvergenceReport> {
    run_cases(scheme, Mode::Temporal, dim, &temporal_cases(scheme, dim))
}

pub fn run_spatial_convergence(scheme: SchemeKind, dim: usize) -> Result<ConvergenceReport> {
    run_cases(scheme, Mode::Spatial, dim, &spatial_cases(scheme, dim))
}

/// One row of the CPU-time versus error sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub scheme: SchemeKind,
    pub k: f64,
    pub h: f64,
    pub linf: f64,
    pub cpu_seconds: f64,
    pub mean_gmres_iterations: f64,
}

/// Times every case of the temporal or spatial study for each scheme.
pub fn run_efficiency_sweep(schemes: &[SchemeKind], dim: usize, vary: Mode) -> Result<Vec<EfficiencyRow>> {
    let mut out = Vec::new();
    for &scheme in schemes {
        let cases = match vary {
            Mode::Temporal => temporal_cases(scheme, dim),
            Mode::Spatial => spatial_cases(scheme, dim),
        };
        for case in &cases {
            let r = run_manufactured(case)?;
            out.push(EfficiencyRow {
                scheme,
                k: r.k,
                h: r.h,
                linf: r.linf,
                cpu_seconds: r.cpu_seconds,
                mean_gmres_iterations: r.mean_gmres_iterations,
            });
        }
    }
    Ok(out)
}
