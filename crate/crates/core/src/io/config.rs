//! Run configuration: a TOML document with flat sections, resolved to dimensionless values.
//!
//! Parsing collects every violation (unknown sections or keys, wrong types, unit-block
//! conflicts, out-of-range values) before failing.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::field::ExchangeForm;
use crate::grid::{GridSpec, StencilOrder};
use crate::harness::thinfilm::{ENERGY_ALPHAS, STABILITY_ALPHAS, STABILITY_STEPS_PS};
use crate::integrators::{MfSign, SchemeKind};
use crate::krylov::GmresSettings;
use crate::material::{MaterialParams, PhysicalConstants};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ConvergeTime,
    ConvergeSpace,
    Efficiency,
    Stability,
    Energy,
    Wall,
    Simulate,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::ConvergeTime,
        Experiment::ConvergeSpace,
        Experiment::Efficiency,
        Experiment::Stability,
        Experiment::Energy,
        Experiment::Wall,
        Experiment::Simulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ConvergeTime => "converge-time",
            Experiment::ConvergeSpace => "converge-space",
            Experiment::Efficiency => "efficiency",
            Experiment::Stability => "stability",
            Experiment::Energy => "energy",
            Experiment::Wall => "wall",
            Experiment::Simulate => "simulate",
        }
    }

    /// Physical runs on a grid with material constants.
    pub fn is_physical(self) -> bool {
        matches!(self, Experiment::Stability | Experiment::Energy | Experiment::Wall | Experiment::Simulate)
    }

    fn sections(self) -> &'static [&'static str] {
        match self {
            Experiment::ConvergeTime | Experiment::ConvergeSpace | Experiment::Efficiency => {
                &["run", "solver", "scheme"]
            }
            Experiment::Stability | Experiment::Energy => {
                &["run", "grid", "physical", "time", "solver", "scheme", "initial"]
            }
            Experiment::Wall => &["run", "grid", "physical", "time", "solver", "scheme", "wall"],
            Experiment::Simulate => &[
                "run",
                "grid",
                "physical",
                "dimensionless",
                "time",
                "solver",
                "scheme",
                "initial",
            ],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::Config(format!("unknown experiment '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// Quantity swept by the efficiency study.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vary {
    #[default]
    K,
    H,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InitialState {
    Uniform { direction: [f64; 3] },
    /// Centre and width in dimensionless lengths.
    NeelWall { x0: f64, width: f64 },
    Dump { path: PathBuf },
}

/// Wall experiment options (physical units).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallOptions {
    pub x0_nm: f64,
    pub width_nm: Option<f64>,
    pub relax_ns: f64,
    pub relax_alpha: f64,
    pub fields_mt: Vec<f64>,
    pub frame_every: usize,
    pub edge_margin_nm: f64,
}

impl Default for WallOptions {
    fn default() -> Self {
        Self {
            x0_nm: 200.0,
            width_nm: None,
            relax_ns: 0.1,
            relax_alpha: 5.0,
            fields_mt: vec![5.0],
            frame_every: 10,
            edge_margin_nm: 50.0,
        }
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub schemes: Vec<SchemeKind>,
    pub output: PathBuf,
    /// Field dumps every this many steps (0: final state only).
    pub dump_every: usize,
    /// Dimension of the manufactured problem.
    pub dim: usize,
    pub vary: Vary,
    /// SI constants; `None` for a dimensionless run.
    pub units: Option<PhysicalConstants>,
    pub counts: [usize; 3],
    /// Dimensionless domain lengths.
    pub lengths: [f64; 3],
    pub epsilon: f64,
    pub q: f64,
    /// Dimensionless applied field.
    pub he: [f64; 3],
    pub stray: bool,
    pub alphas: Vec<f64>,
    /// Dimensionless step sizes.
    pub steps: Vec<f64>,
    /// Dimensionless final time.
    pub t_end: f64,
    /// GMRES settings; the experiment's own when absent.
    pub solver: Option<GmresSettings>,
    pub precondition: Option<bool>,
    pub precond_every: Option<usize>,
    pub order: Option<StencilOrder>,
    pub mf_sign: MfSign,
    pub exchange: ExchangeForm,
    pub initial: InitialState,
    pub wall: WallOptions,
}

impl RunConfig {
    /// Defaults of an experiment: the thin film for stability and energy runs, the
    /// nanostrip for walls.
    pub fn defaults(experiment: Experiment) -> Self {
        let pc = PhysicalConstants::permalloy();
        let nm = |v: f64| pc.meters_to_length(v * 1e-9);
        let ps = |v: f64| pc.seconds_to_time(v * 1e-12);
        let ns = |v: f64| pc.seconds_to_time(v * 1e-9);
        let mut c = Self {
            experiment,
            schemes: vec![SchemeKind::Bdf3Proposed],
            output: PathBuf::from("out"),
            dump_every: 0,
            dim: 1,
            vary: Vary::K,
            units: Some(pc),
            counts: [100, 100, 4],
            lengths: [nm(480.0), nm(480.0), nm(20.0)],
            epsilon: pc.epsilon(),
            q: pc.q(),
            he: [0.0; 3],
            stray: true,
            alphas: vec![1.0],
            steps: vec![ps(1.0)],
            t_end: ns(2.0),
            solver: None,
            precondition: None,
            precond_every: None,
            order: None,
            mf_sign: MfSign::default(),
            exchange: ExchangeForm::default(),
            initial: InitialState::Uniform { direction: [1.0, 0.0, 0.0] },
            wall: WallOptions::default(),
        };
        match experiment {
            Experiment::ConvergeTime | Experiment::ConvergeSpace => {
                c.units = None;
                c.alphas = vec![crate::harness::convergence::MMS_ALPHA];
            }
            Experiment::Efficiency => {
                c.units = None;
                c.schemes = vec![SchemeKind::Bdf1, SchemeKind::Bdf2Sipm, SchemeKind::Bdf3Proposed];
                c.alphas = vec![crate::harness::convergence::MMS_ALPHA];
            }
            Experiment::Stability => {
                c.alphas = STABILITY_ALPHAS.to_vec();
                c.steps = STABILITY_STEPS_PS.iter().map(|&v| ps(v)).collect();
            }
            Experiment::Energy => {
                c.schemes = SchemeKind::ALL.to_vec();
                c.alphas = ENERGY_ALPHAS.to_vec();
            }
            Experiment::Wall => {
                c.counts = [128, 64, 4];
                c.lengths = [nm(800.0), nm(100.0), nm(4.0)];
                c.alphas = vec![0.1];
                c.t_end = ns(1.6);
                c.precondition = Some(true);
                c.precond_every = Some(10);
            }
            Experiment::Simulate => {}
        }
        c
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.counts, self.lengths)
    }

    /// Material parameters at damping `alpha`.
    pub fn params(&self, alpha: f64) -> Result<MaterialParams> {
        let p = MaterialParams {
            epsilon: self.epsilon,
            q: self.q,
            alpha,
            he: self.he,
            stray_enabled: self.stray,
            physical: self.units,
        };
        p.validate()?;
        Ok(p)
    }

    /// Semantic checks; every problem is reported.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if self.schemes.is_empty() {
            p.push("at least one scheme is required".to_string());
        }
        if self.experiment == Experiment::Simulate && self.schemes.len() > 1 {
            p.push("simulate runs exactly one scheme".to_string());
        }
        if !matches!(self.dim, 1 | 3) {
            p.push(format!("dim must be 1 or 3, got {}", self.dim));
        }
        if self.experiment.is_physical() {
            if let Err(e) = self.grid() {
                p.extend(messages(e));
            }
            if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
                p.push(format!("epsilon must be positive, got {}", self.epsilon));
            }
            if !(self.q.is_finite() && self.q >= 0.0) {
                p.push(format!("q must be non-negative, got {}", self.q));
            }
            if self.he.iter().any(|v| !v.is_finite()) {
                p.push("applied field must be finite".into());
            }
            if let Some(pc) = &self.units {
                if let Err(e) = pc.validate() {
                    p.extend(messages(e));
                }
            }
            if self.steps.is_empty() {
                p.push("at least one time step is required".into());
            }
            for &k in &self.steps {
                if !(k.is_finite() && k > 0.0) {
                    p.push(format!("time step must be positive, got {k}"));
                }
            }
            if !(self.t_end.is_finite() && self.t_end > 0.0) {
                p.push(format!("final time must be positive, got {}", self.t_end));
            }
            if self.experiment != Experiment::Simulate && self.units.is_none() {
                p.push(format!("experiment {} needs a [physical] block", self.experiment));
            }
        }
        if self.alphas.is_empty() {
            p.push("at least one alpha is required".into());
        }
        for &a in &self.alphas {
            if !(a.is_finite() && a >= 0.0) {
                p.push(format!("alpha must be non-negative, got {a}"));
            }
        }
        if self.experiment == Experiment::Simulate && self.alphas.len() > 1 {
            p.push("simulate runs exactly one alpha".into());
        }
        if matches!(self.experiment, Experiment::Simulate | Experiment::Wall) && self.steps.len() > 1 {
            p.push(format!("{} runs exactly one time step", self.experiment).into());
        }
        if let Some(Err(e)) = self.solver.map(|s| s.validate()) {
            p.extend(messages(e));
        }
        if self.precond_every == Some(0) {
            p.push("precond_every must be >= 1".into());
        }
        match &self.initial {
            InitialState::Uniform { direction } => {
                let n = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(n.is_finite() && n > 1e-12) {
                    p.push("initial direction must be a non-zero vector".into());
                }
            }
            InitialState::NeelWall { width, .. } => {
                if !(width.is_finite() && *width > 0.0) {
                    p.push(format!("wall width must be positive, got {width}"));
                }
            }
            InitialState::Dump { .. } => {}
        }
        if self.experiment == Experiment::Wall {
            let w = &self.wall;
            if w.fields_mt.is_empty() {
                p.push("at least one wall field is required".into());
            }
            if w.fields_mt.iter().any(|v| !v.is_finite()) {
                p.push("wall fields must be finite".into());
            }
            if w.width_nm.is_some_and(|v| !(v.is_finite() && v > 0.0)) {
                p.push("wall width_nm must be positive".into());
            }
            if !(w.relax_ns.is_finite() && w.relax_ns >= 0.0) {
                p.push("relax_ns must be non-negative".into());
            }
            if !(w.relax_alpha.is_finite() && w.relax_alpha >= 0.0) {
                p.push("relax_alpha must be non-negative".into());
            }
            if w.frame_every == 0 {
                p.push("frame_every must be >= 1".into());
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigList(p))
        }
    }

    /// Resolved parameters, one `key = value` per line.
    pub fn echo(&self) -> Vec<String> {
        let mut out = vec![
            format!("llg version = {VERSION}"),
            format!("experiment = {}", self.experiment),
            format!(
                "schemes = {}",
                self.schemes.iter().map(|s| s.name()).collect::<Vec<_>>().join(",")
            ),
        ];
        match (&self.units, self.experiment.is_physical()) {
            (Some(pc), true) => {
                out.push(format!(
                    "unit map: L = {:e} m, field unit mu0*Ms = {:e} T, tau = 1/(mu0*gamma*Ms) = {:e} s",
                    pc.length,
                    pc.field_unit(),
                    pc.tau()
                ));
                out.push(format!(
                    "constants: mu0 = {:e}, Ms = {:e}, Cex = {:e}, Ku = {:e}, gamma = {:e}",
                    pc.mu0, pc.ms, pc.cex, pc.ku, pc.gamma
                ));
            }
            (None, true) => out.push("unit map: dimensionless".to_string()),
            _ => out.push("unit map: dimensionless (manufactured solution)".to_string()),
        }
        if self.experiment.is_physical() {
            out.push(format!("grid counts = {:?}", self.counts));
            out.push(format!("grid lengths = {:?}", self.lengths));
            if let Ok(g) = self.grid() {
                out.push(format!("grid spacing = {:?}", g.spacing()));
            }
            out.push(format!("epsilon = {:e}", self.epsilon));
            out.push(format!("q = {:e}", self.q));
            out.push(format!("he = {:?}", self.he));
            out.push(format!("stray = {}", self.stray));
            out.push(format!("k = {:?}", self.steps));
            out.push(format!("t_end = {:e}", self.t_end));
        } else {
            out.push(format!("dim = {}", self.dim));
        }
        out.push(format!("alphas = {:?}", self.alphas));
        out.push(format!(
            "solver: {}, precondition = {}, precond_every = {}",
            self.solver.map_or("default".to_string(), |s| format!(
                "tol = {:e}, restart = {}, max_restarts = {}",
                s.tol, s.restart, s.max_restarts
            )),
            self.precondition.map_or("default".to_string(), |b| b.to_string()),
            self.precond_every.map_or("default".to_string(), |b| b.to_string()),
        ));
        out.push(format!(
            "stencil = {}, mf_sign = {:?}, exchange_energy = {:?}",
            self.order.map_or("scheme default", |o| o.name()),
            self.mf_sign,
            self.exchange
        ));
        out
    }
}

fn messages(e: Error) -> Vec<String> {
    match e {
        Error::ConfigList(v) => v,
        other => vec![other.to_string()],
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("malformed config: {}", e.message())))?;
    let mut r = Reader::default();
    for (name, v) in &root {
        if !v.is_table() {
            r.err(format!("top-level key '{name}' must be a [section]"));
        }
    }
    let run = r.section(&root, "run");
    let Some(run) = run else {
        r.err("missing [run] section".into());
        return Err(Error::ConfigList(r.errors));
    };
    let Some(exp_name) = r.string(&run, "experiment") else {
        r.err("[run] experiment is required".into());
        return Err(Error::ConfigList(r.errors));
    };
    let experiment = match exp_name.parse::<Experiment>() {
        Ok(e) => e,
        Err(e) => {
            r.errors.extend(messages(e));
            return Err(Error::ConfigList(r.errors));
        }
    };
    for name in root.keys() {
        if !experiment.sections().contains(&name.as_str()) {
            if ["run", "grid", "physical", "dimensionless", "time", "solver", "scheme", "initial", "wall"]
                .contains(&name.as_str())
            {
                r.err(format!("section [{name}] is not used by experiment {experiment}"));
            } else {
                r.err(format!("unknown section [{name}]"));
            }
        }
    }
    let mut c = RunConfig::defaults(experiment);

    // [run]
    if run.has("scheme") && run.has("schemes") {
        r.err("[run] give either scheme or schemes, not both".into());
    }
    if let Some(s) = r.string(&run, "scheme") {
        match s.parse() {
            Ok(k) => c.schemes = vec![k],
            Err(e) => r.errors.extend(messages(e)),
        }
    }
    if let Some(list) = r.string_list(&run, "schemes") {
        let mut v = Vec::new();
        for s in list {
            match s.parse() {
                Ok(k) => v.push(k),
                Err(e) => r.errors.extend(messages(e)),
            }
        }
        c.schemes = v;
    }
    if let Some(s) = r.string(&run, "output") {
        c.output = PathBuf::from(s);
    }
    if let Some(n) = r.count(&run, "dump_every") {
        c.dump_every = n;
    }
    if let Some(n) = r.count(&run, "dim") {
        c.dim = n;
    }
    if let Some(s) = r.string(&run, "vary") {
        match s.as_str() {
            "k" => c.vary = Vary::K,
            "h" => c.vary = Vary::H,
            other => r.err(format!("[run] vary must be \"k\" or \"h\", got \"{other}\"")),
        }
    }
    if run.has("alpha") && run.has("alphas") {
        r.err("[run] give either alpha or alphas, not both".into());
    }
    if !experiment.is_physical() && (run.has("alpha") || run.has("alphas")) {
        r.err(format!("[run] damping is fixed for experiment {experiment}"));
    }
    if let Some(a) = r.number(&run, "alpha") {
        c.alphas = vec![a];
    }
    if let Some(a) = r.numbers(&run, "alphas") {
        c.alphas = a;
    }
    r.finish(&run);

    // material blocks
    let phys = r.section(&root, "physical");
    let dimless = r.section(&root, "dimensionless");
    if phys.is_some() && dimless.is_some() {
        r.err("both [physical] and [dimensionless] blocks present; give exactly one".into());
    }
    if experiment == Experiment::Simulate && phys.is_none() && dimless.is_none() {
        r.err("simulate needs exactly one of [physical] or [dimensionless]".into());
    }
    let mut pc = PhysicalConstants::permalloy();
    if let Some(s) = &phys {
        if let Some(v) = r.number(s, "mu0") {
            pc.mu0 = v;
        }
        if let Some(v) = r.number(s, "ms") {
            pc.ms = v;
        }
        if let Some(v) = r.number(s, "cex") {
            pc.cex = v;
        }
        if let Some(v) = r.number(s, "ku") {
            pc.ku = v;
        }
        if let Some(v) = r.number(s, "length") {
            pc.length = v;
        }
        if let Some(v) = r.number(s, "gamma") {
            pc.gamma = v;
        }
        if let Some(v) = r.vec3(s, "he_mt") {
            c.he = v.map(|x| pc.millitesla_to_field(x));
        }
        if let Some(b) = r.boolean(s, "stray") {
            c.stray = b;
        }
        r.finish(s);
    }
    if let Some(s) = &dimless {
        c.units = None;
        c.epsilon = r.number(s, "epsilon").unwrap_or_else(|| {
            r.err("[dimensionless] epsilon is required".into());
            f64::NAN
        });
        c.q = r.number(s, "q").unwrap_or(0.0);
        c.he = r.vec3(s, "he").unwrap_or([0.0; 3]);
        c.stray = r.boolean(s, "stray").unwrap_or(false);
        r.finish(s);
    } else if experiment.is_physical() {
        let ok = pc.validate().is_ok();
        c.units = Some(pc);
        if ok {
            c.epsilon = pc.epsilon();
            c.q = pc.q();
        } else if let Err(e) = pc.validate() {
            r.errors.extend(messages(e));
        }
    }
    let physical = c.units.filter(|_| experiment.is_physical());
    let to_len = |v: f64| physical.map_or(v, |pc| pc.meters_to_length(v * 1e-9));
    let to_time_ps = |v: f64| physical.map_or(f64::NAN, |pc| pc.seconds_to_time(v * 1e-12));
    let to_time_ns = |v: f64| physical.map_or(f64::NAN, |pc| pc.seconds_to_time(v * 1e-9));

    // [grid]
    if let Some(s) = r.section(&root, "grid") {
        if let Some(v) = r.counts3(&s, "counts") {
            c.counts = v;
        }
        r.exclusive(&s, "lengths_nm", "lengths");
        if let Some(v) = r.vec3(&s, "lengths_nm") {
            if physical.is_none() {
                r.err("[grid] lengths_nm needs a [physical] block; use lengths".into());
            }
            c.lengths = v.map(to_len);
        }
        if let Some(v) = r.vec3(&s, "lengths") {
            c.lengths = v;
        }
        r.finish(&s);
    } else if experiment == Experiment::Simulate {
        r.err("simulate needs a [grid] section".into());
    }

    // [time]
    if let Some(s) = r.section(&root, "time") {
        r.exclusive(&s, "k_ps", "k");
        r.exclusive(&s, "t_end_ns", "t_end");
        if let Some(v) = r.numbers(&s, "k_ps") {
            if physical.is_none() {
                r.err("[time] k_ps needs a [physical] block; use k".into());
            }
            c.steps = v.into_iter().map(to_time_ps).collect();
        }
        if let Some(v) = r.numbers(&s, "k") {
            c.steps = v;
        }
        if let Some(v) = r.number(&s, "t_end_ns") {
            if physical.is_none() {
                r.err("[time] t_end_ns needs a [physical] block; use t_end".into());
            }
            c.t_end = to_time_ns(v);
        }
        if let Some(v) = r.number(&s, "t_end") {
            c.t_end = v;
        }
        r.finish(&s);
    } else if experiment == Experiment::Simulate {
        r.err("simulate needs a [time] section".into());
    }

    // [solver]
    if let Some(s) = r.section(&root, "solver") {
        let mut gs = GmresSettings::default();
        let mut touched = false;
        if let Some(v) = r.number(&s, "tol") {
            gs.tol = v;
            touched = true;
        }
        if let Some(v) = r.count(&s, "restart") {
            gs.restart = v;
            touched = true;
        }
        if let Some(v) = r.count(&s, "max_restarts") {
            gs.max_restarts = v;
            touched = true;
        }
        if touched {
            c.solver = Some(gs);
        }
        if let Some(v) = r.boolean(&s, "precondition") {
            c.precondition = Some(v);
        }
        if let Some(v) = r.count(&s, "precond_every") {
            c.precond_every = Some(v);
        }
        r.finish(&s);
    }

    // [scheme]
    if let Some(s) = r.section(&root, "scheme") {
        if let Some(v) = r.string(&s, "order") {
            match v.as_str() {
                "second" | "2" => c.order = Some(StencilOrder::Second),
                "fourth" | "4" => c.order = Some(StencilOrder::Fourth),
                other => r.err(format!("[scheme] order must be \"second\" or \"fourth\", got \"{other}\"")),
            }
        }
        if let Some(v) = r.string(&s, "mf_sign") {
            match v.as_str() {
                "plus" => c.mf_sign = MfSign::Plus,
                "minus" => c.mf_sign = MfSign::Minus,
                other => r.err(format!("[scheme] mf_sign must be \"plus\" or \"minus\", got \"{other}\"")),
            }
        }
        if let Some(v) = r.string(&s, "exchange_energy") {
            match v.as_str() {
                "gradient" => c.exchange = ExchangeForm::Gradient,
                "laplacian" => c.exchange = ExchangeForm::Laplacian,
                other => r.err(format!(
                    "[scheme] exchange_energy must be \"gradient\" or \"laplacian\", got \"{other}\""
                )),
            }
        }
        r.finish(&s);
    }

    // [initial]
    if let Some(s) = r.section(&root, "initial") {
        let kind = r.string(&s, "kind").unwrap_or_else(|| "uniform".into());
        match kind.as_str() {
            "uniform" => {
                c.initial = InitialState::Uniform {
                    direction: r.vec3(&s, "direction").unwrap_or([1.0, 0.0, 0.0]),
                };
            }
            "neel-wall" => {
                r.exclusive(&s, "x0_nm", "x0");
                r.exclusive(&s, "width_nm", "width");
                let x0 = r.number(&s, "x0_nm").map(to_len).or_else(|| r.number(&s, "x0"));
                let width = r.number(&s, "width_nm").map(to_len).or_else(|| r.number(&s, "width"));
                let default_w = physical.map(|pc| pc.meters_to_length(pc.exchange_length()));
                match (x0, width.or(default_w)) {
                    (Some(x0), Some(width)) => c.initial = InitialState::NeelWall { x0, width },
                    (None, _) => r.err("[initial] neel-wall needs x0 (or x0_nm)".into()),
                    (_, None) => r.err("[initial] neel-wall needs width (or width_nm)".into()),
                }
            }
            "dump" => match r.string(&s, "path") {
                Some(p) => c.initial = InitialState::Dump { path: PathBuf::from(p) },
                None => r.err("[initial] dump needs path".into()),
            },
            other => r.err(format!(
                "[initial] kind must be \"uniform\", \"neel-wall\" or \"dump\", got \"{other}\""
            )),
        }
        r.finish(&s);
    }

    // [wall]
    if let Some(s) = r.section(&root, "wall") {
        let w = &mut c.wall;
        if let Some(v) = r.number(&s, "x0_nm") {
            w.x0_nm = v;
        }
        if let Some(v) = r.number(&s, "width_nm") {
            w.width_nm = Some(v);
        }
        if let Some(v) = r.number(&s, "relax_ns") {
            w.relax_ns = v;
        }
        if let Some(v) = r.number(&s, "relax_alpha") {
            w.relax_alpha = v;
        }
        if let Some(v) = r.numbers(&s, "fields_mt") {
            w.fields_mt = v;
        }
        if let Some(v) = r.count(&s, "frame_every") {
            w.frame_every = v;
        }
        if let Some(v) = r.number(&s, "edge_margin_nm") {
            w.edge_margin_nm = v;
        }
        r.finish(&s);
    }

    if let Err(e) = c.validate() {
        r.errors.extend(messages(e));
    }
    if r.errors.is_empty() {
        Ok(c)
    } else {
        Err(Error::ConfigList(r.errors))
    }
}

struct Section<'a> {
    name: &'a str,
    table: &'a Table,
    used: std::cell::RefCell<BTreeSet<String>>,
}

impl Section<'_> {
    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn get(&self, key: &str) -> Option<&Value> {
        let v = self.table.get(key);
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }
}

#[derive(Default)]
struct Reader {
    errors: Vec<String>,
}

impl Reader {
    fn err(&mut self, msg: String) {
        self.errors.push(msg);
    }

    fn section<'a>(&mut self, root: &'a Table, name: &'a str) -> Option<Section<'a>> {
        root.get(name).and_then(|v| v.as_table()).map(|table| Section {
            name,
            table,
            used: Default::default(),
        })
    }

    fn finish(&mut self, s: &Section) {
        let used = s.used.borrow();
        for key in s.table.keys() {
            if !used.contains(key) {
                self.errors.push(format!("unknown key '{key}' in [{}]", s.name));
            }
        }
    }

    fn exclusive(&mut self, s: &Section, a: &str, b: &str) {
        if s.has(a) && s.has(b) {
            self.err(format!("[{}] give either {a} or {b}, not both", s.name));
        }
    }

    fn type_err(&mut self, s: &Section, key: &str, want: &str, got: &Value) {
        self.err(format!("[{}] {key} must be {want}, got {}", s.name, got.type_str()));
    }

    fn number(&mut self, s: &Section, key: &str) -> Option<f64> {
        let v = s.get(key)?;
        match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.type_err(s, key, "a number", other);
                None
            }
        }
    }

    /// A number or an array of numbers.
    fn numbers(&mut self, s: &Section, key: &str) -> Option<Vec<f64>> {
        let v = s.get(key)?;
        let one = |v: &Value| match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        };
        match v {
            Value::Array(a) => {
                let out: Option<Vec<f64>> = a.iter().map(one).collect();
                if out.is_none() {
                    self.err(format!("[{}] {key} must be an array of numbers", s.name));
                }
                out
            }
            other => match one(other) {
                Some(x) => Some(vec![x]),
                None => {
                    self.type_err(s, key, "a number or an array of numbers", other);
                    None
                }
            },
        }
    }

    fn vec3(&mut self, s: &Section, key: &str) -> Option<[f64; 3]> {
        let v = self.numbers(s, key)?;
        match <[f64; 3]>::try_from(v) {
            Ok(a) => Some(a),
            Err(v) => {
                self.err(format!("[{}] {key} needs exactly 3 numbers, got {}", s.name, v.len()));
                None
            }
        }
    }

    fn count(&mut self, s: &Section, key: &str) -> Option<usize> {
        let v = s.get(key)?;
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            Value::Integer(i) => {
                self.err(format!("[{}] {key} must be non-negative, got {i}", s.name));
                None
            }
            other => {
                self.type_err(s, key, "an integer", other);
                None
            }
        }
    }

    fn counts3(&mut self, s: &Section, key: &str) -> Option<[usize; 3]> {
        let v = s.get(key)?;
        let arr = match v {
            Value::Array(a) => a,
            other => {
                self.type_err(s, key, "an array of 3 integers", other);
                return None;
            }
        };
        let vals: Option<Vec<usize>> = arr
            .iter()
            .map(|x| x.as_integer().filter(|i| *i >= 0).map(|i| i as usize))
            .collect();
        match vals.map(<[usize; 3]>::try_from) {
            Some(Ok(a)) => Some(a),
            _ => {
                self.err(format!("[{}] {key} must be an array of 3 non-negative integers", s.name));
                None
            }
        }
    }

    fn boolean(&mut self, s: &Section, key: &str) -> Option<bool> {
        let v = s.get(key)?;
        match v {
            Value::Boolean(b) => Some(*b),
            other => {
                self.type_err(s, key, "a boolean", other);
                None
            }
        }
    }

    fn string(&mut self, s: &Section, key: &str) -> Option<String> {
        let v = s.get(key)?;
        match v {
            Value::String(t) => Some(t.clone()),
            other => {
                self.type_err(s, key, "a string", other);
                None
            }
        }
    }

    fn string_list(&mut self, s: &Section, key: &str) -> Option<Vec<String>> {
        let v = s.get(key)?;
        match v {
            Value::String(t) => Some(vec![t.clone()]),
            Value::Array(a) => {
                let out: Option<Vec<String>> = a.iter().map(|x| x.as_str().map(String::from)).collect();
                if out.is_none() {
                    self.err(format!("[{}] {key} must be an array of strings", s.name));
                }
                out
            }
            other => {
                self.type_err(s, key, "a string or an array of strings", other);
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_stability_config() {
        let c = parse_config("[run]\nexperiment = \"stability\"\nscheme = \"bdf2\"\n").unwrap();
        assert_eq!(c.schemes, vec![SchemeKind::Bdf2Sipm]);
        assert_eq!(c.alphas.len(), 8);
        assert_eq!(c.counts, [100, 100, 4]);
        assert!(c.echo().iter().any(|l| l.starts_with("epsilon = ")));
    }

    #[test]
    fn both_unit_blocks_rejected() {
        let text = "[run]\nexperiment = \"simulate\"\n[grid]\ncounts=[8,1,1]\nlengths=[1,1,1]\n\
                    [time]\nk=0.1\nt_end=1\n[physical]\nms=8e5\n[dimensionless]\nepsilon=1\n";
        let msg = parse_config(text).unwrap_err().to_string();
        assert!(msg.contains("both [physical] and [dimensionless]"), "{msg}");
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "[run]\nexperiment = \"stability\"\nschems = [\"bdf1\"]\nalpha = -1\n[time]\nk_ps = 0\n[bogus]\nx = 1\n";
        match parse_config(text).unwrap_err() {
            Error::ConfigList(v) => {
                let all = v.join("\n");
                assert!(all.contains("unknown key 'schems'"), "{all}");
                assert!(all.contains("unknown section [bogus]"), "{all}");
                assert!(all.contains("alpha must be non-negative"), "{all}");
                assert!(all.contains("time step must be positive"), "{all}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unit_conversion_of_step() {
        let c = parse_config("[run]\nexperiment = \"energy\"\n[time]\nk_ps = 1.0\nt_end_ns = 0.5\n").unwrap();
        let tau = 1.0 / (4e-7 * std::f64::consts::PI * 1.7595e11 * 8.0e5);
        assert!((c.steps[0] - 1e-12 / tau).abs() < 1e-12);
        assert!((c.t_end - 0.5e-9 / tau).abs() < 1e-9);
    }
}
