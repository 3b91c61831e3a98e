//! Permalloy thin film relaxing from a uniform in-plane state.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demag::DemagKernel;
use crate::error::Result;
use crate::field::FieldModel;
use crate::grid::{GridSpec, ScalarField, VectorField3};
use crate::harness::dynamics::{run_dynamics, DynamicsRun, RunSettings};
use crate::integrators::{SchemeConfig, SchemeKind};
use crate::krylov::GmresSettings;
use crate::material::{MaterialParams, PhysicalConstants};

pub const STABILITY_ALPHAS: [f64; 8] = [0.0, 0.01, 0.1, 1.0, 5.0, 10.0, 40.0, 100.0];
pub const STABILITY_STEPS_PS: [f64; 2] = [1.0, 0.1];
pub const ENERGY_ALPHAS: [f64; 4] = [0.1, 1.0, 5.0, 10.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinFilmSetup {
    pub counts: [usize; 3],
    pub lengths_nm: [f64; 3],
    pub constants: PhysicalConstants,
    pub initial: [f64; 3],
    pub t_end_ns: f64,
    pub solver: GmresSettings,
    /// Line preconditioner in GMRES.
    pub precondition: bool,
    /// Preconditioner rebuild interval in steps.
    pub precond_every: usize,
}

impl Default for ThinFilmSetup {
    fn default() -> Self {
        Self {
            counts: [100, 100, 4],
            lengths_nm: [480.0, 480.0, 20.0],
            constants: PhysicalConstants::permalloy(),
            initial: [1.0, 0.0, 0.0],
            t_end_ns: 2.0,
            solver: GmresSettings::default(),
            precondition: false,
            precond_every: 1,
        }
    }
}

impl ThinFilmSetup {
    pub fn grid(&self) -> Result<GridSpec> {
        let pc = &self.constants;
        let len = self.lengths_nm.map(|v| pc.meters_to_length(v * 1e-9));
        GridSpec::new(self.counts, len)
    }

    pub fn kernel(&self) -> Result<Arc<DemagKernel>> {
        Ok(Arc::new(DemagKernel::new(self.grid()?)?))
    }

    pub fn params(&self, alpha: f64) -> Result<MaterialParams> {
        MaterialParams::from_physical(self.constants, alpha, [0.0; 3], true)
    }

    pub fn model(&self, alpha: f64, kernel: &Arc<DemagKernel>) -> Result<FieldModel> {
        FieldModel::with_kernel(self.params(alpha)?, Some(kernel.clone()))
    }

    pub fn initial_state(&self) -> Result<VectorField3> {
        Ok(VectorField3::uniform(self.grid()?, self.initial))
    }

    pub fn step(&self, k_ps: f64) -> f64 {
        self.constants.seconds_to_time(k_ps * 1e-12)
    }

    pub fn horizon(&self) -> f64 {
        self.constants.seconds_to_time(self.t_end_ns * 1e-9)
    }

    pub fn ns(&self, t: f64) -> f64 {
        self.constants.time_to_seconds(t) * 1e9
    }
}

/// One cell of the stability matrix.
#[derive(Clone, Debug)]
pub struct ThinFilmRun {
    pub k_ps: f64,
    pub run: DynamicsRun,
}

/// Runs `kind` at damping `alpha` and step `k_ps` over the setup's horizon.
pub fn run_thin_film(
    setup: &ThinFilmSetup,
    kernel: &Arc<DemagKernel>,
    kind: SchemeKind,
    alpha: f64,
    k_ps: f64,
) -> Result<ThinFilmRun> {
    let settings = RunSettings::new(setup.horizon(), alpha);
    run_thin_film_with(setup, kernel, kind, alpha, k_ps, &settings)
}

pub fn run_thin_film_with(
    setup: &ThinFilmSetup,
    kernel: &Arc<DemagKernel>,
    kind: SchemeKind,
    alpha: f64,
    k_ps: f64,
    settings: &RunSettings,
) -> Result<ThinFilmRun> {
    let model = setup.model(alpha, kernel)?;
    let mut cfg = SchemeConfig::new(kind, setup.step(k_ps)).with_solver(setup.solver);
    cfg.precond_every = setup.precond_every;
    cfg.precondition = setup.precondition;
    let m0 = setup.initial_state()?;
    let run = run_dynamics(&model, cfg, &m0, settings, |_, _| true)?;
    log::info!(
        "thin film {kind} alpha={alpha} k={k_ps}ps: {} after {} steps ({:.1}s, mean gmres {:.1})",
        run.verdict,
        run.steps,
        run.seconds,
        run.totals.mean_iterations()
    );
    Ok(ThinFilmRun { k_ps, run })
}

/// Every `(alpha, k)` combination for one scheme.
pub fn run_stability_matrix(
    setup: &ThinFilmSetup,
    kernel: &Arc<DemagKernel>,
    kind: SchemeKind,
    alphas: &[f64],
    steps_ps: &[f64],
) -> Result<Vec<ThinFilmRun>> {
    let cells: Vec<(f64, f64)> = steps_ps.iter().flat_map(|&k| alphas.iter().map(move |&a| (a, k))).collect();
    cells
        .par_iter()
        .map(|&(a, k)| run_thin_film(setup, kernel, kind, a, k))
        .collect()
}

/// Energy traces for each scheme and damping at one step size.
pub fn run_energy_comparison(
    setup: &ThinFilmSetup,
    kernel: &Arc<DemagKernel>,
    schemes: &[SchemeKind],
    alphas: &[f64],
    k_ps: f64,
) -> Result<Vec<ThinFilmRun>> {
    let cells: Vec<(SchemeKind, f64)> = schemes.iter().flat_map(|&s| alphas.iter().map(move |&a| (s, a))).collect();
    cells
        .par_iter()
        .map(|&(s, a)| run_thin_film(setup, kernel, s, a, k_ps))
        .collect()
}

/// In-plane angle `atan2(m2, m1)` per cell.
pub fn angle_field(m: &VectorField3) -> ScalarField {
    let mut out = ScalarField::zeros(*m.grid());
    let vals = out.values_mut();
    m.for_each_cell(|i, j, l, idx| {
        let v = m.get(i, j, l);
        vals[idx] = v[1].atan2(v[0]);
    });
    out
}
