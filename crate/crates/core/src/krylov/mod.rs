//! Restarted GMRES with right preconditioning, plus the implicit operators of the schemes.

mod banded;
mod operator;

pub use banded::BandedLu;
pub use operator::{assemble_dense, dense_solve, ImplicitOperator, LinePreconditioner, OperatorForm};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SolveFailure};

/// Linear map on flat vectors.
pub trait LinearOperator {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Approximate inverse applied on the right: `z ~ A^-1 r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// `z = r`.
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmresSettings {
    /// Relative residual target `|b - Ax| / |b|`.
    pub tol: f64,
    /// Krylov basis size per cycle.
    pub restart: usize,
    /// Maximum number of restart cycles.
    pub max_restarts: usize,
}

impl Default for GmresSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            restart: 30,
            max_restarts: 200,
        }
    }
}

impl GmresSettings {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.tol > 0.0 && self.tol < 1.0) {
            problems.push(format!("solver tol must lie in (0, 1), got {}", self.tol));
        }
        if self.restart == 0 {
            problems.push("solver restart must be >= 1".into());
        }
        if self.max_restarts == 0 {
            problems.push("solver max_restarts must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigList(problems))
        }
    }
}

/// Outcome of one linear solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Arnoldi steps over all cycles.
    pub iterations: usize,
    /// Cycles started after the first one.
    pub restarts: usize,
    /// `|b - Ax| / |b|` recomputed from the returned iterate.
    pub relative_residual: f64,
    pub seconds: f64,
}

/// Running totals over many solves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTotals {
    pub solves: usize,
    pub iterations: usize,
    pub max_iterations: usize,
    pub max_relative_residual: f64,
    pub seconds: f64,
}

impl SolveTotals {
    pub fn record(&mut self, s: &SolveStats) {
        self.solves += 1;
        self.iterations += s.iterations;
        self.max_iterations = self.max_iterations.max(s.iterations);
        self.max_relative_residual = self.max_relative_residual.max(s.relative_residual);
        self.seconds += s.seconds;
    }

    /// Adds another accumulator into this one.
    pub fn absorb(&mut self, o: &SolveTotals) {
        self.solves += o.solves;
        self.iterations += o.iterations;
        self.max_iterations = self.max_iterations.max(o.max_iterations);
        self.max_relative_residual = self.max_relative_residual.max(o.max_relative_residual);
        self.seconds += o.seconds;
    }

    pub fn mean_iterations(&self) -> f64 {
        if self.solves == 0 {
            0.0
        } else {
            self.iterations as f64 / self.solves as f64
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(op: &dyn LinearOperator, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    op.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm(r)
}

/// Solves `A x = b` from `x0`. Fails with the best iterate when `max_restarts` cycles
/// do not reach `tol`.
pub fn gmres_solve(
    op: &dyn LinearOperator,
    precond: Option<&dyn Preconditioner>,
    b: &[f64],
    x0: &[f64],
    settings: &GmresSettings,
) -> Result<(Vec<f64>, SolveStats)> {
    let start = Instant::now();
    let n = op.len();
    assert_eq!(b.len(), n, "rhs length");
    assert_eq!(x0.len(), n, "initial guess length");
    let identity = IdentityPreconditioner;
    let pc: &dyn Preconditioner = precond.unwrap_or(&identity);

    let mut x = x0.to_vec();
    let mut stats = SolveStats::default();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        stats.seconds = start.elapsed().as_secs_f64();
        return Ok((x, stats));
    }
    if !bnorm.is_finite() {
        return Err(Error::NonFinite("linear solve right-hand side"));
    }
    let target = settings.tol * bnorm;
    let m = settings.restart.min(n).max(1);

    let mut r = vec![0.0; n];
    let mut beta = residual(op, b, &x, &mut r);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];

    for cycle in 0..settings.max_restarts {
        if beta <= target {
            break;
        }
        if !beta.is_finite() {
            return Err(Error::NonFinite("linear solve residual"));
        }
        if cycle > 0 {
            stats.restarts += 1;
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            pc.apply(&basis[j], &mut z);
            op.apply(&z, &mut w);
            for i in 0..=j {
                let hij = dot(&w, &basis[i]);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(&basis[i]) {
                    *wk -= hij * vk;
                }
            }
            let hn = norm(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == 0.0 {
                used = j;
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            stats.iterations += 1;
            used = j + 1;
            if g[j + 1].abs() <= target || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }

        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= h[i][k] * y[k];
            }
            y[i] = s / h[i][i];
        }
        w.iter_mut().for_each(|v| *v = 0.0);
        for (yi, vi) in y.iter().zip(&basis) {
            for (wk, vk) in w.iter_mut().zip(vi) {
                *wk += yi * vk;
            }
        }
        pc.apply(&w, &mut z);
        for (xk, zk) in x.iter_mut().zip(&z) {
            *xk += zk;
        }
        beta = residual(op, b, &x, &mut r);
        if used == 0 {
            break;
        }
    }

    stats.relative_residual = beta / bnorm;
    stats.seconds = start.elapsed().as_secs_f64();
    if beta <= target {
        Ok((x, stats))
    } else if !beta.is_finite() {
        Err(Error::NonFinite("linear solve residual"))
    } else {
        Err(Error::SolverNotConverged(Box::new(SolveFailure { best: x, stats })))
    }
}
