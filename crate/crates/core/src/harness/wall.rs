//! Field-driven Néel wall in a Permalloy nanostrip.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::demag::DemagKernel;
use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::grid::{GridSpec, VectorField3};
use crate::harness::dynamics::{run_dynamics, EnergyRule, RunSettings, Verdict};
use crate::integrators::{SchemeConfig, SchemeKind};
use crate::krylov::{GmresSettings, SolveTotals};
use crate::material::{MaterialParams, PhysicalConstants};

pub const WALL_ALPHAS: [f64; 7] = [0.1, 0.4, 0.8, 1.0, 2.0, 3.0, 5.0];
pub const WALL_FIELDS_MT: [f64; 3] = [5.0, 7.0, 9.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallSetup {
    pub counts: [usize; 3],
    pub lengths_nm: [f64; 3],
    pub constants: PhysicalConstants,
    /// Initial wall centre.
    pub x0_nm: f64,
    /// Profile width; the exchange length when absent.
    pub width_nm: Option<f64>,
    pub relax_ns: f64,
    pub relax_alpha: f64,
    pub relax_scheme: SchemeKind,
    pub t_end_ns: f64,
    pub k_ps: f64,
    /// Wall position sampled every this many steps.
    pub frame_every: usize,
    /// Positions closer than this to either end count as an exit.
    pub edge_margin_nm: f64,
    pub solver: GmresSettings,
    /// Line preconditioner in GMRES.
    pub precondition: bool,
    /// Preconditioner rebuild interval in steps.
    pub precond_every: usize,
}

impl Default for WallSetup {
    fn default() -> Self {
        Self {
            counts: [128, 64, 4],
            lengths_nm: [800.0, 100.0, 4.0],
            constants: PhysicalConstants::permalloy(),
            x0_nm: 200.0,
            width_nm: None,
            relax_ns: 0.1,
            relax_alpha: 5.0,
            relax_scheme: SchemeKind::Bdf2Sipm,
            t_end_ns: 1.6,
            k_ps: 1.0,
            frame_every: 10,
            edge_margin_nm: 50.0,
            solver: GmresSettings::default(),
            precondition: true,
            precond_every: 10,
        }
    }
}

impl WallSetup {
    pub fn grid(&self) -> Result<GridSpec> {
        let pc = &self.constants;
        GridSpec::new(self.counts, self.lengths_nm.map(|v| pc.meters_to_length(v * 1e-9)))
    }

    pub fn kernel(&self) -> Result<Arc<DemagKernel>> {
        Ok(Arc::new(DemagKernel::new(self.grid()?)?))
    }

    pub fn width_nm(&self) -> f64 {
        self.width_nm.unwrap_or(self.constants.exchange_length() * 1e9)
    }

    fn nm(&self, v: f64) -> f64 {
        self.constants.meters_to_length(v * 1e-9)
    }

    pub fn model(&self, alpha: f64, he_mt: f64, kernel: &Arc<DemagKernel>) -> Result<FieldModel> {
        let p = MaterialParams::from_physical(self.constants, alpha, [he_mt, 0.0, 0.0], true)?;
        FieldModel::with_kernel(p, Some(kernel.clone()))
    }

    pub fn initial_state(&self) -> Result<VectorField3> {
        init_neel_wall(self.grid()?, self.nm(self.x0_nm), self.nm(self.width_nm()))
    }

    /// Zero-field relaxation of the initial profile at large damping.
    pub fn relaxed_state(&self, kernel: &Arc<DemagKernel>) -> Result<VectorField3> {
        let m0 = self.initial_state()?;
        if self.relax_ns <= 0.0 {
            return Ok(m0);
        }
        let model = self.model(self.relax_alpha, 0.0, kernel)?;
        let k = self.constants.seconds_to_time(self.k_ps * 1e-12);
        let mut cfg = SchemeConfig::new(self.relax_scheme, k).with_solver(self.solver);
        cfg.precond_every = self.precond_every;
        cfg.precondition = self.precondition;
        let mut settings = RunSettings::new(self.constants.seconds_to_time(self.relax_ns * 1e-9), self.relax_alpha);
        settings.rule = EnergyRule::Ignore;
        settings.energy_every = 0;
        let run = run_dynamics(&model, cfg, &m0, &settings, |_, _| true)?;
        if run.verdict != Verdict::Stable {
            return Err(Error::Config(format!(
                "wall relaxation did not complete: {}",
                run.failure.unwrap_or_default()
            )));
        }
        let mut m = run.final_m;
        m.time = 0.0;
        Ok(m)
    }
}

/// `m1 = -tanh((x - x0)/delta)`, `m2 = sech((x - x0)/delta)`, `m3 = 0`.
pub fn init_neel_wall(grid: GridSpec, x0: f64, delta: f64) -> Result<VectorField3> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("wall width must be positive, got {delta}")));
    }
    Ok(VectorField3::from_fn(grid, |x| {
        let s = (x[0] - x0) / delta;
        let m1 = -s.tanh();
        let m2 = 1.0 / s.cosh();
        let r = m1.hypot(m2);
        [m1 / r, m2 / r, 0.0]
    }))
}

/// Zero crossing of the `(y, z)`-averaged `m1` along x, linearly interpolated between
/// cell centres. Picks the crossing nearest `near` when there are several.
pub fn wall_position(m: &VectorField3, near: Option<f64>) -> Option<f64> {
    let grid = m.grid();
    let [nx, ny, nz] = grid.counts();
    let mut avg = vec![0.0; nx];
    for l in 0..nz {
        for j in 0..ny {
            for (i, a) in avg.iter_mut().enumerate() {
                *a += m.get(i, j, l)[0];
            }
        }
    }
    let xs: Vec<f64> = (0..nx).map(|i| grid.cell_center(i, 0, 0)[0]).collect();
    let mut best: Option<f64> = None;
    for i in 0..nx.saturating_sub(1) {
        let (a, b) = (avg[i], avg[i + 1]);
        if a == 0.0 || (a > 0.0) != (b > 0.0) {
            let x = if a == b { xs[i] } else { xs[i] + a / (a - b) * (xs[i + 1] - xs[i]) };
            best = match (best, near) {
                (None, _) => Some(x),
                (Some(p), Some(c)) if (x - c).abs() < (p - c).abs() => Some(x),
                (p, _) => p,
            };
        }
    }
    best
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallSample {
    pub t_ns: f64,
    pub x_nm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WallRun {
    pub scheme: SchemeKind,
    pub alpha: f64,
    pub he_mt: f64,
    pub trace: Vec<WallSample>,
    /// Slope over the second half of the trace [m/s]; NaN without two samples there.
    pub velocity: f64,
    pub verdict: Verdict,
    /// The wall left the strip (or reached the edge margin) before the end.
    pub exited: bool,
    pub failure: Option<String>,
    pub totals: SolveTotals,
    pub max_unit_deviation: f64,
    pub seconds: f64,
}

/// Velocity over the second half (in time) of a position trace, in m/s.
pub fn trace_velocity(trace: &[WallSample]) -> f64 {
    let (Some(first), Some(last)) = (trace.first(), trace.last()) else {
        return f64::NAN;
    };
    let mid = 0.5 * (first.t_ns + last.t_ns);
    let (t, x): (Vec<f64>, Vec<f64>) = trace.iter().filter(|s| s.t_ns >= mid).map(|s| (s.t_ns, s.x_nm)).unzip();
    fit_slope(&t, &x).unwrap_or(f64::NAN)
}

/// Applies `he_mt` along +x to `start` and tracks the wall.
pub fn run_wall_velocity(
    setup: &WallSetup,
    kernel: &Arc<DemagKernel>,
    start: &VectorField3,
    kind: SchemeKind,
    alpha: f64,
    he_mt: f64,
) -> Result<WallRun> {
    let pc = setup.constants;
    let model = setup.model(alpha, he_mt, kernel)?;
    let k = pc.seconds_to_time(setup.k_ps * 1e-12);
    let mut cfg = SchemeConfig::new(kind, k).with_solver(setup.solver);
    cfg.precond_every = setup.precond_every;
    cfg.precondition = setup.precondition;
    let mut settings = RunSettings::new(pc.seconds_to_time(setup.t_end_ns * 1e-9), alpha);
    settings.rule = EnergyRule::Ignore;
    settings.energy_every = 0;

    let to_nm = |x: f64| pc.length_to_meters(x) * 1e9;
    let lx = setup.lengths_nm[0];
    let every = setup.frame_every.max(1);
    let mut trace = Vec::new();
    let mut last: Option<f64> = None;
    let mut exited = false;
    let run = run_dynamics(&model, cfg, start, &settings, |step, level| {
        if step % every != 0 {
            return true;
        }
        match wall_position(&level.m, last) {
            Some(x) => {
                let x_nm = to_nm(x);
                if x_nm < setup.edge_margin_nm || x_nm > lx - setup.edge_margin_nm {
                    exited = true;
                    return false;
                }
                last = Some(x);
                trace.push(WallSample {
                    t_ns: pc.time_to_seconds(level.t) * 1e9,
                    x_nm,
                });
                true
            }
            None => {
                exited = true;
                false
            }
        }
    })?;
    // nm/ns = m/s
    let velocity = trace_velocity(&trace);
    log::info!(
        "wall {kind} alpha={alpha} he={he_mt}mT: v={velocity:.2} m/s {}{} ({:.1}s, mean gmres {:.1})",
        run.verdict,
        if exited { " (exited)" } else { "" },
        run.seconds,
        run.totals.mean_iterations()
    );
    Ok(WallRun {
        scheme: kind,
        alpha,
        he_mt,
        trace,
        velocity,
        verdict: run.verdict,
        exited,
        failure: run.failure,
        totals: run.totals,
        max_unit_deviation: run.max_unit_deviation,
        seconds: run.seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_examples() {
        let g = GridSpec::new([64, 1, 1], [64.0, 1.0, 1.0]).unwrap();
        let m = init_neel_wall(g, 32.0, 2.0).unwrap();
        let left = m.get(0, 0, 0);
        let right = m.get(63, 0, 0);
        assert!((left[0] - 1.0).abs() < 1e-12 && (right[0] + 1.0).abs() < 1e-12);
        assert!(m.max_unit_deviation() < 1e-15);
        let x = wall_position(&m, None).unwrap();
        assert!((x - 32.0).abs() < 1e-12);
        let c = init_neel_wall(g, 31.5, 2.0).unwrap();
        assert!((c.get(31, 0, 0)[1] - 1.0).abs() < 1e-15);
        assert!(init_neel_wall(g, 1.0, 0.0).unwrap_err().is_config());
    }

    #[test]
    fn no_crossing_without_wall() {
        let g = GridSpec::new([8, 1, 1], [8.0, 1.0, 1.0]).unwrap();
        assert!(wall_position(&VectorField3::uniform(g, [1.0, 0.0, 0.0]), None).is_none());
    }

    #[test]
    fn slope_of_line() {
        let tr: Vec<WallSample> = (0..10)
            .map(|i| WallSample {
                t_ns: i as f64 * 0.1,
                x_nm: 200.0 + 150.0 * i as f64 * 0.1 + if i < 5 { 30.0 } else { 0.0 },
            })
            .collect();
        assert!((trace_velocity(&tr) - 150.0).abs() < 1e-9);
        assert!(trace_velocity(&tr[..1]).is_nan());
    }
}
