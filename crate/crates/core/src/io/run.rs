//! Executes a [`RunConfig`], writing tables, dumps and verdicts under its output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::demag::DemagKernel;
use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::grid::VectorField3;
use crate::harness::convergence::{
    run_cases, run_manufactured, spatial_cases, temporal_cases, ConvergenceReport, ManufacturedCase, Mode,
};
use crate::harness::dynamics::{run_dynamics, DynamicsRun, RunSettings, Verdict};
use crate::harness::wall::{init_neel_wall, run_wall_velocity, WallRun, WallSetup};
use crate::integrators::{SchemeConfig, SchemeKind};
use crate::io::config::{Experiment, InitialState, RunConfig, Vary, VERSION};
use crate::io::dump::{read_dump, write_dump, write_vtk};
use crate::io::table::Table;

/// Verdict of one run of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellVerdict {
    pub scheme: SchemeKind,
    pub alpha: Option<f64>,
    pub k: Option<f64>,
    pub he_mt: Option<f64>,
    pub verdict: Verdict,
    pub detail: Option<String>,
    pub dir: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub version: &'static str,
    pub experiment: Experiment,
    pub output: PathBuf,
    /// Some run blew up (solver failure, singular projection, non-finite values).
    pub any_unstable: bool,
    /// Every run finished with a stable verdict.
    pub all_stable: bool,
    pub failure: Option<String>,
    pub cells: Vec<CellVerdict>,
}

impl Outcome {
    fn new(cfg: &RunConfig, cells: Vec<CellVerdict>) -> Self {
        Self {
            version: VERSION,
            experiment: cfg.experiment,
            output: cfg.output.clone(),
            any_unstable: cells.iter().any(|c| c.verdict == Verdict::Unstable),
            all_stable: cells.iter().all(|c| c.verdict == Verdict::Stable),
            failure: None,
            cells,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Runs the configured experiment. Only `cfg.output` is written to.
///
/// A blow-up that aborts the whole experiment (rather than ending one run of a sweep with an
/// unstable verdict) still leaves a `verdict.json` describing the failure.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output)?;
    fs::write(cfg.output.join("config.txt"), cfg.echo().join("\n") + "\n")?;
    let result = match cfg.experiment {
        Experiment::ConvergeTime => converge(cfg, Mode::Temporal),
        Experiment::ConvergeSpace => converge(cfg, Mode::Spatial),
        Experiment::Efficiency => efficiency(cfg),
        Experiment::Stability | Experiment::Energy => thin_film(cfg),
        Experiment::Wall => wall(cfg),
        Experiment::Simulate => simulate(cfg),
    };
    match result {
        Ok(outcome) => {
            write_json(&cfg.output.join("verdict.json"), &outcome)?;
            Ok(outcome)
        }
        Err(e) if e.is_blow_up() => {
            let mut outcome = Outcome::new(cfg, Vec::new());
            outcome.any_unstable = true;
            outcome.all_stable = false;
            outcome.failure = Some(e.to_string());
            write_json(&cfg.output.join("verdict.json"), &outcome)?;
            Ok(outcome)
        }
        Err(e) => Err(e),
    }
}

fn tune_cases(cfg: &RunConfig, mut cases: Vec<ManufacturedCase>) -> Vec<ManufacturedCase> {
    for c in &mut cases {
        if let Some(s) = cfg.solver {
            c.solver = s;
        }
        if let Some(p) = cfg.precondition {
            c.precondition = p;
        }
        if let Some(o) = cfg.order {
            c.order = o;
        }
    }
    cases
}

fn cases_for(cfg: &RunConfig, scheme: SchemeKind, mode: Mode) -> Vec<ManufacturedCase> {
    let cases = match mode {
        Mode::Temporal => temporal_cases(scheme, cfg.dim),
        Mode::Spatial => spatial_cases(scheme, cfg.dim),
    };
    tune_cases(cfg, cases)
}

fn converge(cfg: &RunConfig, mode: Mode) -> Result<Outcome> {
    let header = cfg.echo();
    let mut orders = Table::new(&header, &["scheme", "mode", "dim", "order_linf", "order_l2", "order_h1"]);
    let mut cells = Vec::new();
    for &scheme in &cfg.schemes {
        let report = run_cases(scheme, mode, cfg.dim, &cases_for(cfg, scheme, mode))?;
        error_table(&header, &report).write(&cfg.output.join(format!("{}_{}_{}d.csv", scheme, mode.name(), cfg.dim)))?;
        let o = report.orders;
        orders.push(vec![
            scheme.name().into(),
            mode.name().into(),
            cfg.dim.into(),
            o.map_or(f64::NAN, |o| o.linf).into(),
            o.map_or(f64::NAN, |o| o.l2).into(),
            o.map_or(f64::NAN, |o| o.h1).into(),
        ]);
        let finite = report.rows.iter().all(|r| r.linf.is_finite());
        cells.push(CellVerdict {
            scheme,
            alpha: Some(report.alpha),
            k: None,
            he_mt: None,
            verdict: if finite { Verdict::Stable } else { Verdict::Unstable },
            detail: o.map(|o| format!("orders linf {:.3} l2 {:.3} h1 {:.3}", o.linf, o.l2, o.h1)),
            dir: None,
        });
    }
    orders.write(&cfg.output.join("orders.csv"))?;
    Ok(Outcome::new(cfg, cells))
}

fn error_table(header: &[String], report: &ConvergenceReport) -> Table {
    let mut t = Table::new(
        header,
        &[
            "k",
            "h",
            "n",
            "steps",
            "linf",
            "l2",
            "h1",
            "mean_gmres_iterations",
            "max_gmres_iterations",
            "max_unit_deviation",
            "cpu_seconds",
        ],
    );
    for r in &report.rows {
        t.push(vec![
            r.k.into(),
            r.h.into(),
            r.n.into(),
            r.steps.into(),
            r.linf.into(),
            r.l2.into(),
            r.h1.into(),
            r.mean_gmres_iterations.into(),
            r.max_gmres_iterations.into(),
            r.max_unit_deviation.into(),
            r.cpu_seconds.into(),
        ]);
    }
    t
}

fn efficiency(cfg: &RunConfig) -> Result<Outcome> {
    let mode = match cfg.vary {
        Vary::K => Mode::Temporal,
        Vary::H => Mode::Spatial,
    };
    let mut t = Table::new(
        &cfg.echo(),
        &["scheme", "k", "h", "linf", "mean_gmres_iterations", "cpu_seconds"],
    );
    let mut cells = Vec::new();
    for &scheme in &cfg.schemes {
        for case in cases_for(cfg, scheme, mode) {
            let r = run_manufactured(&case)?;
            t.push(vec![
                scheme.name().into(),
                r.k.into(),
                r.h.into(),
                r.linf.into(),
                r.mean_gmres_iterations.into(),
                r.cpu_seconds.into(),
            ]);
        }
        cells.push(CellVerdict {
            scheme,
            alpha: None,
            k: None,
            he_mt: None,
            verdict: Verdict::Stable,
            detail: None,
            dir: None,
        });
    }
    t.write(&cfg.output.join("efficiency.csv"))?;
    Ok(Outcome::new(cfg, cells))
}

fn kernel(cfg: &RunConfig) -> Result<Option<Arc<DemagKernel>>> {
    if cfg.stray {
        Ok(Some(Arc::new(DemagKernel::new(cfg.grid()?)?)))
    } else {
        Ok(None)
    }
}

fn model(cfg: &RunConfig, alpha: f64, he: [f64; 3], kernel: &Option<Arc<DemagKernel>>) -> Result<FieldModel> {
    let mut p = cfg.params(alpha)?;
    p.he = he;
    let mut m = FieldModel::with_kernel(p, kernel.clone())?;
    m.exchange = cfg.exchange;
    Ok(m)
}

fn scheme_config(cfg: &RunConfig, kind: SchemeKind, k: f64, precondition: bool, every: usize) -> SchemeConfig {
    let mut c = SchemeConfig::new(kind, k);
    if let Some(s) = cfg.solver {
        c.solver = s;
    }
    if let Some(o) = cfg.order {
        c.order = o;
    }
    c.mf_sign = cfg.mf_sign;
    c.precondition = cfg.precondition.unwrap_or(precondition);
    c.precond_every = cfg.precond_every.unwrap_or(every);
    c
}

fn initial_state(cfg: &RunConfig) -> Result<VectorField3> {
    let grid = cfg.grid()?;
    match &cfg.initial {
        InitialState::Uniform { direction } => {
            let n = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(VectorField3::uniform(grid, direction.map(|v| v / n)))
        }
        InitialState::NeelWall { x0, width } => init_neel_wall(grid, *x0, *width),
        InitialState::Dump { path } => {
            let d = read_dump(path)?;
            grid.ensure_same(d.m.grid())?;
            Ok(d.m)
        }
    }
}

fn ns(cfg: &RunConfig, t: f64) -> f64 {
    cfg.units.map_or(f64::NAN, |pc| pc.time_to_seconds(t) * 1e9)
}

fn ps(cfg: &RunConfig, k: f64) -> f64 {
    cfg.units.map_or(f64::NAN, |pc| pc.time_to_seconds(k) * 1e12)
}

fn tag(v: f64) -> String {
    format!("{}", (v * 1e9).round() / 1e9).replace('-', "m")
}

/// One physical run with energy trace, dumps and a verdict file in `dir`.
fn dynamics_cell(
    cfg: &RunConfig,
    kernel: &Option<Arc<DemagKernel>>,
    m0: &VectorField3,
    kind: SchemeKind,
    alpha: f64,
    k: f64,
    dir: &Path,
) -> Result<DynamicsRun> {
    fs::create_dir_all(dir)?;
    let model = model(cfg, alpha, cfg.he, kernel)?;
    let sc = scheme_config(cfg, kind, k, false, 1);
    let settings = RunSettings::new(cfg.t_end, alpha);
    let mut dump_err = None;
    let run = run_dynamics(&model, sc, m0, &settings, |step, level| {
        if cfg.dump_every > 0 && step % cfg.dump_every == 0 {
            if let Err(e) = write_dump(&dir.join(format!("m_{step:06}.bin")), &level.m, Some(kind)) {
                dump_err = Some(e);
                return false;
            }
        }
        true
    })?;
    if let Some(e) = dump_err {
        return Err(e);
    }
    let mut header = cfg.echo();
    header.push(format!("scheme = {kind}, alpha = {alpha}, k = {k:e}"));
    let mut t = Table::new(&header, &["step", "t", "t_ns", "energy"]);
    for s in &run.energy {
        t.push(vec![s.step.into(), s.t.into(), ns(cfg, s.t).into(), s.energy.into()]);
    }
    t.write(&dir.join("energy.csv"))?;
    write_dump(&dir.join("final.bin"), &run.final_m, Some(kind))?;
    write_vtk(&dir.join("final.vtk"), &run.final_m, &format!("m at t = {:e}", run.t_reached))?;
    write_json(
        &dir.join("verdict.json"),
        &serde_json::json!({
            "version": VERSION,
            "scheme": kind,
            "alpha": alpha,
            "k": k,
            "verdict": run.verdict,
            "failure": run.failure,
            "steps": run.steps,
            "t_reached": run.t_reached,
            "max_relative_increase": run.max_relative_increase,
            "max_drift": run.max_drift,
            "max_unit_deviation": run.max_unit_deviation,
            "t_half": run.t_half(),
        }),
    )?;
    Ok(run)
}

fn thin_film(cfg: &RunConfig) -> Result<Outcome> {
    let kernel = kernel(cfg)?;
    let m0 = initial_state(cfg)?;
    let cells: Vec<(SchemeKind, f64, f64)> = cfg
        .schemes
        .iter()
        .flat_map(|&s| cfg.steps.iter().flat_map(move |&k| cfg.alphas.iter().map(move |&a| (s, k, a))))
        .collect();
    let runs: Vec<(String, DynamicsRun)> = cells
        .par_iter()
        .map(|&(s, k, a)| {
            let name = format!("{s}_alpha{}_k{}", tag(a), tag(ps(cfg, k)));
            let run = dynamics_cell(cfg, &kernel, &m0, s, a, k, &cfg.output.join(&name))?;
            log::info!("{name}: {} after {} steps ({:.1}s)", run.verdict, run.steps, run.seconds);
            Ok((name, run))
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(
        &cfg.echo(),
        &[
            "scheme",
            "alpha",
            "k",
            "k_ps",
            "verdict",
            "steps",
            "t_reached_ns",
            "energy_initial",
            "energy_final",
            "t_half_ns",
            "max_relative_increase",
            "max_drift",
            "mean_gmres_iterations",
            "max_unit_deviation",
            "cpu_seconds",
        ],
    );
    let mut verdicts = Vec::new();
    for (name, r) in &runs {
        t.push(vec![
            r.scheme.name().into(),
            r.alpha.into(),
            r.k.into(),
            ps(cfg, r.k).into(),
            r.verdict.name().into(),
            r.steps.into(),
            ns(cfg, r.t_reached).into(),
            r.initial_energy().unwrap_or(f64::NAN).into(),
            r.final_energy().unwrap_or(f64::NAN).into(),
            ns(cfg, r.t_half()).into(),
            r.max_relative_increase.into(),
            r.max_drift.into(),
            r.totals.mean_iterations().into(),
            r.max_unit_deviation.into(),
            r.seconds.into(),
        ]);
        verdicts.push(CellVerdict {
            scheme: r.scheme,
            alpha: Some(r.alpha),
            k: Some(r.k),
            he_mt: None,
            verdict: r.verdict,
            detail: r.failure.clone(),
            dir: Some(name.clone()),
        });
    }
    t.write(&cfg.output.join(format!("{}.csv", cfg.experiment)))?;
    Ok(Outcome::new(cfg, verdicts))
}

fn wall_setup(cfg: &RunConfig) -> Result<WallSetup> {
    let pc = cfg
        .units
        .ok_or_else(|| Error::Config("wall runs need physical constants".into()))?;
    let nm = |x: f64| pc.length_to_meters(x) * 1e9;
    let w = &cfg.wall;
    let d = WallSetup::default();
    Ok(WallSetup {
        counts: cfg.counts,
        lengths_nm: cfg.lengths.map(nm),
        constants: pc,
        x0_nm: w.x0_nm,
        width_nm: w.width_nm,
        relax_ns: w.relax_ns,
        relax_alpha: w.relax_alpha,
        relax_scheme: d.relax_scheme,
        t_end_ns: pc.time_to_seconds(cfg.t_end) * 1e9,
        k_ps: pc.time_to_seconds(cfg.steps[0]) * 1e12,
        frame_every: w.frame_every,
        edge_margin_nm: w.edge_margin_nm,
        solver: cfg.solver.unwrap_or(d.solver),
        precondition: cfg.precondition.unwrap_or(d.precondition),
        precond_every: cfg.precond_every.unwrap_or(d.precond_every),
    })
}

fn wall(cfg: &RunConfig) -> Result<Outcome> {
    let setup = wall_setup(cfg)?;
    let kernel = setup.kernel()?;
    let start = setup.relaxed_state(&kernel)?;
    write_dump(&cfg.output.join("relaxed.bin"), &start, Some(setup.relax_scheme))?;
    let cells: Vec<(SchemeKind, f64, f64)> = cfg
        .schemes
        .iter()
        .flat_map(|&s| {
            cfg.alphas
                .iter()
                .flat_map(move |&a| cfg.wall.fields_mt.iter().map(move |&h| (s, a, h)))
        })
        .collect();
    let runs: Vec<(String, WallRun)> = cells
        .par_iter()
        .map(|&(s, a, h)| {
            let name = format!("{s}_alpha{}_he{}mT", tag(a), tag(h));
            let dir = cfg.output.join(&name);
            fs::create_dir_all(&dir)?;
            let run = run_wall_velocity(&setup, &kernel, &start, s, a, h)?;
            let mut header = cfg.echo();
            header.push(format!("scheme = {s}, alpha = {a}, he = {h} mT"));
            let mut t = Table::new(&header, &["t_ns", "x_nm"]);
            for p in &run.trace {
                t.push(vec![p.t_ns.into(), p.x_nm.into()]);
            }
            t.write(&dir.join("trace.csv"))?;
            write_json(&dir.join("verdict.json"), &run)?;
            Ok((name, run))
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(
        &cfg.echo(),
        &[
            "scheme",
            "alpha",
            "he_mt",
            "velocity_m_per_s",
            "verdict",
            "exited",
            "mean_gmres_iterations",
            "max_unit_deviation",
            "cpu_seconds",
        ],
    );
    let mut verdicts = Vec::new();
    for (name, r) in &runs {
        t.push(vec![
            r.scheme.name().into(),
            r.alpha.into(),
            r.he_mt.into(),
            r.velocity.into(),
            r.verdict.name().into(),
            r.exited.into(),
            r.totals.mean_iterations().into(),
            r.max_unit_deviation.into(),
            r.seconds.into(),
        ]);
        verdicts.push(CellVerdict {
            scheme: r.scheme,
            alpha: Some(r.alpha),
            k: Some(cfg.steps[0]),
            he_mt: Some(r.he_mt),
            verdict: r.verdict,
            detail: r.failure.clone(),
            dir: Some(name.clone()),
        });
    }
    t.write(&cfg.output.join("wall.csv"))?;
    Ok(Outcome::new(cfg, verdicts))
}

fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let kernel = kernel(cfg)?;
    let m0 = initial_state(cfg)?;
    let (s, a, k) = (cfg.schemes[0], cfg.alphas[0], cfg.steps[0]);
    let r = dynamics_cell(cfg, &kernel, &m0, s, a, k, &cfg.output)?;
    let cell = CellVerdict {
        scheme: s,
        alpha: Some(a),
        k: Some(k),
        he_mt: None,
        verdict: r.verdict,
        detail: r.failure,
        dir: None,
    };
    Ok(Outcome::new(cfg, vec![cell]))
}
