//! Semi-implicit BDF projection schemes.
//!
//! Each step freezes an explicit extrapolation `mhat` (and `fhat`) of the coefficients,
//! solves one linear system for the unnormalized level `mtilde` and projects it back onto
//! the unit sphere.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::grid::{cross, dot, grad_norm_sq, StencilOrder, VectorField3};
use crate::krylov::{
    gmres_solve, GmresSettings, ImplicitOperator, LinePreconditioner, OperatorForm, Preconditioner, SolveStats,
    SolveTotals,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "bdf1")]
    Bdf1,
    #[serde(rename = "bdf2")]
    Bdf2Sipm,
    #[serde(rename = "bdf3-existing")]
    Bdf3Existing,
    #[serde(rename = "bdf3-proposed")]
    Bdf3Proposed,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::Bdf1,
        SchemeKind::Bdf2Sipm,
        SchemeKind::Bdf3Existing,
        SchemeKind::Bdf3Proposed,
    ];

    /// Number of stored levels the update needs.
    pub fn depth(self) -> usize {
        match self {
            SchemeKind::Bdf1 => 1,
            SchemeKind::Bdf2Sipm => 2,
            SchemeKind::Bdf3Existing | SchemeKind::Bdf3Proposed => 3,
        }
    }

    /// Coefficient of the new level in the BDF difference.
    pub fn c0(self) -> f64 {
        match self.depth() {
            1 => 1.0,
            2 => 1.5,
            _ => 11.0 / 6.0,
        }
    }

    /// BDF weights of the stored levels, newest first (moved to the right-hand side).
    pub fn history_weights(self) -> &'static [f64] {
        match self.depth() {
            1 => &[1.0],
            2 => &[2.0, -0.5],
            _ => &[3.0, -1.5, 1.0 / 3.0],
        }
    }

    /// Extrapolation weights, newest first.
    pub fn extrapolation_weights(self) -> &'static [f64] {
        match self.depth() {
            1 => &[1.0],
            2 => &[2.0, -1.0],
            _ => &[3.0, -3.0, 1.0],
        }
    }

    pub fn form(self) -> OperatorForm {
        match self {
            SchemeKind::Bdf3Existing => OperatorForm::Existing,
            _ => OperatorForm::Gilbert,
        }
    }

    /// Stencil order of the spatial operators unless overridden.
    pub fn default_order(self) -> StencilOrder {
        match self {
            SchemeKind::Bdf1 | SchemeKind::Bdf2Sipm => StencilOrder::Second,
            _ => StencilOrder::Fourth,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Bdf1 => "bdf1",
            SchemeKind::Bdf2Sipm => "bdf2",
            SchemeKind::Bdf3Existing => "bdf3-existing",
            SchemeKind::Bdf3Proposed => "bdf3-proposed",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "bdf1" => Ok(SchemeKind::Bdf1),
            "bdf2" | "bdf2-sipm" | "sipm" => Ok(SchemeKind::Bdf2Sipm),
            "bdf3-existing" | "existing" => Ok(SchemeKind::Bdf3Existing),
            "bdf3-proposed" | "proposed" => Ok(SchemeKind::Bdf3Proposed),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (expected bdf1, bdf2, bdf3-existing, bdf3-proposed)"
            ))),
        }
    }
}

/// Sign of the `mhat . fhat` contribution in the existing third-order scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MfSign {
    /// `+alpha (eps |grad mhat|^2 + mhat . fhat) mhat`
    #[default]
    Plus,
    /// `+alpha (eps |grad mhat|^2 - mhat . fhat) mhat`, matching the continuum equation.
    Minus,
}

impl MfSign {
    fn value(self) -> f64 {
        match self {
            MfSign::Plus => 1.0,
            MfSign::Minus => -1.0,
        }
    }
}

/// Analytic right-hand-side forcing `g(x, t)`, evaluated at the new time level.
pub trait Forcing: Send + Sync {
    fn g(&self, x: [f64; 3], t: f64) -> [f64; 3];
}

/// Static settings of a scheme run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Dimensionless step size.
    pub k: f64,
    pub order: StencilOrder,
    pub solver: GmresSettings,
    /// Use the line preconditioner in GMRES.
    pub precondition: bool,
    /// Rebuild the preconditioner every this many steps (1 = every step).
    #[serde(default = "one")]
    pub precond_every: usize,
    pub mf_sign: MfSign,
}

fn one() -> usize {
    1
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, k: f64) -> Self {
        Self {
            kind,
            k,
            order: kind.default_order(),
            solver: GmresSettings::default(),
            precondition: false,
            precond_every: 1,
            mf_sign: MfSign::default(),
        }
    }

    pub fn with_order(mut self, order: StencilOrder) -> Self {
        self.order = order;
        self
    }

    pub fn with_solver(mut self, solver: GmresSettings) -> Self {
        self.solver = solver;
        self
    }

    fn with_kind_step(mut self, kind: SchemeKind, k: f64) -> Self {
        self.kind = kind;
        self.k = k;
        self
    }
}

/// One stored time level.
#[derive(Clone, Debug)]
pub struct Level {
    pub m: VectorField3,
    pub f: VectorField3,
    pub t: f64,
}

/// Per-step diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: f64,
    pub solve: SolveStats,
    pub unit_deviation: f64,
}

/// Pointwise extrapolation `2a - b`.
pub fn extrapolate2(a: &VectorField3, b: &VectorField3) -> VectorField3 {
    VectorField3::linear_combination(&[(2.0, a), (-1.0, b)])
}

/// Pointwise extrapolation `3a - 3b + c`.
pub fn extrapolate3(a: &VectorField3, b: &VectorField3, c: &VectorField3) -> VectorField3 {
    VectorField3::linear_combination(&[(3.0, a), (-3.0, b), (1.0, c)])
}

/// Smallest `|m|` accepted by [`project`].
pub const PROJECTION_FLOOR: f64 = 1e-12;

/// Pointwise normalization `m / |m|`.
pub fn project(mt: &VectorField3) -> Result<VectorField3> {
    let mut out = mt.clone();
    let mut fail: Option<Error> = None;
    mt.for_each_cell(|i, j, l, _| {
        if fail.is_some() {
            return;
        }
        let v = mt.get(i, j, l);
        let r = dot(v, v).sqrt();
        if !r.is_finite() {
            fail = Some(Error::NonFinite("projection"));
        } else if r < PROJECTION_FLOOR {
            fail = Some(Error::SingularProjection { i, j, l, norm: r });
        } else {
            out.set(i, j, l, [v[0] / r, v[1] / r, v[2] / r]);
        }
    });
    match fail {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Samples `g` on the cell centres.
pub fn sample_forcing(forcing: &dyn Forcing, like: &VectorField3, t: f64) -> VectorField3 {
    let mut out = VectorField3::from_fn(*like.grid(), |x| forcing.g(x, t));
    out.time = t;
    out
}

/// Multistep state: the last `depth` accepted levels, oldest first.
#[derive(Clone, Debug)]
pub struct SchemeState {
    pub config: SchemeConfig,
    history: VecDeque<Level>,
    pub step_count: usize,
    pub totals: SolveTotals,
    /// Largest `| |m| - 1 |` over every stored level so far.
    pub max_unit_deviation: f64,
    precond: Option<(usize, LinePreconditioner)>,
}

impl SchemeState {
    /// State from explicit levels (oldest first, equally spaced by `k`).
    pub fn from_levels(config: SchemeConfig, levels: Vec<Level>) -> Result<Self> {
        if levels.len() != config.kind.depth() {
            return Err(Error::Config(format!(
                "{} needs {} history levels, got {}",
                config.kind,
                config.kind.depth(),
                levels.len()
            )));
        }
        let max_unit_deviation = levels.iter().map(|l| l.m.max_unit_deviation()).fold(0.0, f64::max);
        Ok(Self {
            config,
            history: levels.into(),
            step_count: 0,
            totals: SolveTotals::default(),
            max_unit_deviation,
            precond: None,
        })
    }

    /// Samples `exact(x, t)` at `t0, t0 + k, ...` and projects.
    pub fn bootstrap_exact(
        config: SchemeConfig,
        model: &FieldModel,
        grid: crate::grid::GridSpec,
        t0: f64,
        exact: impl Fn([f64; 3], f64) -> [f64; 3],
    ) -> Result<Self> {
        let mut levels = Vec::new();
        for s in 0..config.kind.depth() {
            let t = t0 + s as f64 * config.k;
            let mut m = project(&VectorField3::from_fn(grid, |x| exact(x, t)))?;
            m.time = t;
            let f = model.source(&m)?;
            levels.push(Level { m, f, t });
        }
        Self::from_levels(config, levels)
    }

    /// Self-starting history from one normalized field: BDF1 with `k/4` up to `t0 + k`,
    /// then BDF2 with `k/2` up to `t0 + 2k`.
    pub fn bootstrap_self_start(
        config: SchemeConfig,
        model: &FieldModel,
        m0: &VectorField3,
        t0: f64,
        forcing: Option<&dyn Forcing>,
    ) -> Result<Self> {
        let mut m = project(m0)?;
        m.time = t0;
        let f = model.source(&m)?;
        let first = Level { m, f, t: t0 };
        let depth = config.kind.depth();
        if depth == 1 {
            return Self::from_levels(config, vec![first]);
        }
        let k = config.k;
        let mut totals = SolveTotals::default();

        let mut s1 = Self::from_levels(config.with_kind_step(SchemeKind::Bdf1, k / 4.0), vec![first.clone()])?;
        let mut quarter = Vec::new();
        for _ in 0..4 {
            s1.step(model, forcing)?;
            quarter.push(s1.newest().clone());
        }
        totals.absorb(&s1.totals);
        let mut dev = s1.max_unit_deviation;
        let level1 = retime(quarter[3].clone(), t0 + k);
        if depth == 2 {
            let mut st = Self::from_levels(config, vec![first, level1])?;
            st.totals = totals;
            st.max_unit_deviation = st.max_unit_deviation.max(dev);
            return Ok(st);
        }
        let half = retime(quarter[1].clone(), t0 + 0.5 * k);
        let mut s2 = Self::from_levels(config.with_kind_step(SchemeKind::Bdf2Sipm, k / 2.0), vec![half, level1.clone()])?;
        s2.step(model, forcing)?;
        s2.step(model, forcing)?;
        totals.absorb(&s2.totals);
        dev = dev.max(s2.max_unit_deviation);
        let level2 = retime(s2.newest().clone(), t0 + 2.0 * k);
        let mut st = Self::from_levels(config, vec![first, level1, level2])?;
        st.totals = totals;
        st.max_unit_deviation = st.max_unit_deviation.max(dev);
        Ok(st)
    }

    pub fn kind(&self) -> SchemeKind {
        self.config.kind
    }

    pub fn newest(&self) -> &Level {
        self.history.back().expect("history is never empty")
    }

    pub fn history(&self) -> impl Iterator<Item = &Level> {
        self.history.iter()
    }

    pub fn time(&self) -> f64 {
        self.newest().t
    }

    /// Advances one step of size `k`.
    pub fn step(&mut self, model: &FieldModel, forcing: Option<&dyn Forcing>) -> Result<StepReport> {
        let cfg = self.config;
        let kind = cfg.kind;
        let k = cfg.k;
        let p = &model.params;
        let newest_first: Vec<&Level> = self.history.iter().rev().collect();
        let t_new = newest_first[0].t + k;

        let combine = |weights: &[f64], pick: &dyn Fn(&Level) -> &VectorField3| {
            let terms: Vec<(f64, &VectorField3)> =
                weights.iter().zip(&newest_first).map(|(&w, l)| (w, pick(l))).collect();
            VectorField3::linear_combination(&terms)
        };
        let mhat = combine(kind.extrapolation_weights(), &|l| &l.m);
        let fhat = combine(kind.extrapolation_weights(), &|l| &l.f);
        let hist = combine(kind.history_weights(), &|l| &l.m);

        let grad_sq = if kind.form() == OperatorForm::Existing {
            Some(grad_norm_sq(&mhat.with_ghosts(), cfg.order))
        } else {
            None
        };
        let g = forcing.map(|fc| sample_forcing(fc, &mhat, t_new));

        let mut rhs = hist;
        let alpha = p.alpha;
        let sign = cfg.mf_sign.value();
        mhat.for_each_cell(|i, j, l, idx| {
            let m = mhat.get(i, j, l);
            let f = fhat.get(i, j, l);
            let mxf = cross(m, f);
            let mut extra = match kind.form() {
                OperatorForm::Gilbert => {
                    let mmf = cross(m, mxf);
                    [-mxf[0] - alpha * mmf[0], -mxf[1] - alpha * mmf[1], -mxf[2] - alpha * mmf[2]]
                }
                OperatorForm::Existing => {
                    let gs = grad_sq.as_ref().map_or(0.0, |s| s.values()[idx]);
                    let s = alpha * (p.epsilon * gs + sign * dot(m, f));
                    [
                        -mxf[0] + alpha * f[0] + s * m[0],
                        -mxf[1] + alpha * f[1] + s * m[1],
                        -mxf[2] + alpha * f[2] + s * m[2],
                    ]
                }
            };
            if let Some(g) = &g {
                let gv = g.get(i, j, l);
                for c in 0..3 {
                    extra[c] += gv[c];
                }
            }
            let mut b = rhs.get(i, j, l);
            for c in 0..3 {
                b[c] += k * extra[c];
            }
            rhs.set(i, j, l, b);
        });

        let op = ImplicitOperator::new(kind.c0(), k, p.epsilon, alpha, kind.form(), cfg.order, &mhat);
        if cfg.precondition {
            let stale = match &self.precond {
                Some((built, _)) => self.step_count - built >= cfg.precond_every.max(1),
                None => true,
            };
            if stale {
                self.precond = Some((self.step_count, LinePreconditioner::new(&op)?));
            }
        }
        let pc = self.precond.as_ref().filter(|_| cfg.precondition).map(|(_, p)| p as &dyn Preconditioner);
        let b = rhs.flat();
        let x0 = mhat.flat();
        let (x, stats) = gmres_solve(&op, pc, &b, &x0, &cfg.solver)?;
        let mut mt = VectorField3::from_flat(*mhat.grid(), &x);
        mt.time = t_new;
        let mut m_new = project(&mt)?;
        m_new.time = t_new;
        let unit_deviation = m_new.max_unit_deviation();
        let f_new = model.source(&m_new)?;

        self.history.push_back(Level {
            m: m_new,
            f: f_new,
            t: t_new,
        });
        if self.history.len() > kind.depth() {
            self.history.pop_front();
        }
        self.step_count += 1;
        self.totals.record(&stats);
        self.max_unit_deviation = self.max_unit_deviation.max(unit_deviation);
        Ok(StepReport {
            t: t_new,
            solve: stats,
            unit_deviation,
        })
    }
}

fn retime(mut l: Level, t: f64) -> Level {
    l.t = t;
    l.m.time = t;
    l.f.time = t;
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::material::MaterialParams;

    #[test]
    fn extrapolation_examples() {
        let g = GridSpec::line(4, 1.0).unwrap();
        let a = VectorField3::uniform(g, [1.0, 0.0, 0.0]);
        let b = VectorField3::uniform(g, [0.0, 1.0, 0.0]);
        let c = VectorField3::uniform(g, [0.0, 0.0, 1.0]);
        assert!(extrapolate2(&a, &b).cells().all(|v| v == [2.0, -1.0, 0.0]));
        assert!(extrapolate3(&a, &b, &c).cells().all(|v| v == [3.0, -3.0, 1.0]));
        // t^2 sampled at 1, 2, 3 extrapolates to 16
        let s = |t: f64| VectorField3::uniform(g, [t * t, 0.0, 0.0]);
        assert!(extrapolate3(&s(3.0), &s(2.0), &s(1.0)).cells().all(|v| v[0] == 16.0));
    }

    #[test]
    fn projection_examples() {
        let g = GridSpec::line(4, 1.0).unwrap();
        let p = project(&VectorField3::uniform(g, [3.0, 4.0, 0.0])).unwrap();
        assert!(p.cells().all(|v| (v[0] - 0.6).abs() < 1e-16 && (v[1] - 0.8).abs() < 1e-16));
        let err = project(&VectorField3::uniform(g, [0.0, 0.0, 1e-13])).unwrap_err();
        assert!(matches!(err, Error::SingularProjection { i: 0, .. }));
        assert!(err.is_blow_up());
    }

    #[test]
    fn uniform_state_is_stationary() {
        let g = GridSpec::new([6, 5, 4], [1.0, 1.0, 1.0]).unwrap();
        let model = FieldModel::new(MaterialParams::dimensionless(1.0, 0.0, 0.5), g).unwrap();
        let m0 = VectorField3::uniform(g, [1.0, 0.0, 0.0]);
        for kind in SchemeKind::ALL {
            let mut st = SchemeState::bootstrap_self_start(SchemeConfig::new(kind, 0.01), &model, &m0, 0.0, None).unwrap();
            for _ in 0..3 {
                st.step(&model, None).unwrap();
            }
            for v in st.newest().m.cells() {
                assert!((v[0] - 1.0).abs() < 1e-13 && v[1].abs() < 1e-13 && v[2].abs() < 1e-13);
            }
            let expect = (kind.depth() + 2) as f64 * 0.01;
            assert!((st.time() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for kind in SchemeKind::ALL {
            assert_eq!(kind.name().parse::<SchemeKind>().unwrap(), kind);
        }
        assert!("bdf4".parse::<SchemeKind>().is_err());
    }
}
