//! Time stepping of physical runs with energy monitoring and a stability verdict.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::grid::VectorField3;
use crate::integrators::{Level, SchemeConfig, SchemeKind, SchemeState};
use crate::krylov::SolveTotals;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    /// Solver failure, singular projection or non-finite values.
    Unstable,
    /// Completed (or stopped early) with an energy increase beyond the jitter bound.
    AnomalousEnergy,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::AnomalousEnergy => "anomalous-energy",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the energy trace is judged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum EnergyRule {
    /// Per-step relative increase at most `jitter` after `warmup` steps.
    Monotone { jitter: f64, warmup: usize },
    /// `|E - E0| / |E0|` at most `tol` over the whole run.
    Drift { tol: f64 },
    Ignore,
}

impl EnergyRule {
    /// Monotone decay for damped runs, bounded drift without damping.
    pub fn for_alpha(alpha: f64) -> Self {
        if alpha > 0.0 {
            EnergyRule::Monotone {
                jitter: 1e-8,
                warmup: 10,
            }
        } else {
            EnergyRule::Drift { tol: 1e-3 }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    /// Final dimensionless time.
    pub t_end: f64,
    pub rule: EnergyRule,
    /// Record the energy every this many steps (0 disables the trace).
    pub energy_every: usize,
    /// Stop as soon as the energy rule is violated.
    pub stop_on_anomaly: bool,
}

impl RunSettings {
    pub fn new(t_end: f64, alpha: f64) -> Self {
        Self {
            t_end,
            rule: EnergyRule::for_alpha(alpha),
            energy_every: 1,
            stop_on_anomaly: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
}

/// Outcome of a physical run.
#[derive(Clone, Debug)]
pub struct DynamicsRun {
    pub scheme: SchemeKind,
    pub alpha: f64,
    pub k: f64,
    pub verdict: Verdict,
    pub failure: Option<String>,
    /// Steps after the bootstrap.
    pub steps: usize,
    pub t_reached: f64,
    pub energy: Vec<EnergySample>,
    pub final_m: VectorField3,
    pub totals: SolveTotals,
    pub max_unit_deviation: f64,
    /// Largest per-step relative energy increase after the warm-up.
    pub max_relative_increase: f64,
    /// Largest `|E - E0| / |E0|`.
    pub max_drift: f64,
    pub seconds: f64,
}

impl DynamicsRun {
    pub fn initial_energy(&self) -> Option<f64> {
        self.energy.first().map(|s| s.energy)
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.energy.last().map(|s| s.energy)
    }

    /// First time the energy falls to `(E0 + E_end) / 2`, interpolated linearly between
    /// samples. NaN for runs without a stable verdict.
    pub fn t_half(&self) -> f64 {
        if self.verdict != Verdict::Stable {
            return f64::NAN;
        }
        t_half(&self.energy)
    }
}

/// See [`DynamicsRun::t_half`].
pub fn t_half(trace: &[EnergySample]) -> f64 {
    let (Some(first), Some(last)) = (trace.first(), trace.last()) else {
        return f64::NAN;
    };
    let target = 0.5 * (first.energy + last.energy);
    if first.energy <= target {
        return first.t;
    }
    for w in trace.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.energy <= target {
            let s = (a.energy - target) / (a.energy - b.energy);
            return a.t + s * (b.t - a.t);
        }
    }
    f64::NAN
}

struct Monitor {
    rule: EnergyRule,
    e0: Option<f64>,
    prev: Option<f64>,
    max_increase: f64,
    max_drift: f64,
    violated: bool,
}

impl Monitor {
    fn new(rule: EnergyRule) -> Self {
        Self {
            rule,
            e0: None,
            prev: None,
            max_increase: 0.0,
            max_drift: 0.0,
            violated: false,
        }
    }

    fn push(&mut self, step: usize, e: f64) {
        let e0 = *self.e0.get_or_insert(e);
        let scale = e0.abs().max(f64::MIN_POSITIVE);
        self.max_drift = self.max_drift.max((e - e0).abs() / scale);
        if let Some(prev) = self.prev {
            let inc = (e - prev) / prev.abs().max(scale);
            match self.rule {
                EnergyRule::Monotone { jitter, warmup } if step > warmup => {
                    self.max_increase = self.max_increase.max(inc);
                    if inc > jitter {
                        self.violated = true;
                    }
                }
                EnergyRule::Drift { tol } => {
                    self.max_increase = self.max_increase.max(inc);
                    if self.max_drift > tol {
                        self.violated = true;
                    }
                }
                _ => {}
            }
        }
        self.prev = Some(e);
    }
}

/// Runs `config` from `m0` (self-started) until `settings.t_end`.
///
/// `observe` sees every accepted level (including the bootstrap levels, with step 0 for
/// the initial state) and may return `false` to stop early. Numerical failures end the
/// run with an unstable verdict; configuration errors are returned.
pub fn run_dynamics(
    model: &FieldModel,
    config: SchemeConfig,
    m0: &VectorField3,
    settings: &RunSettings,
    mut observe: impl FnMut(usize, &Level) -> bool,
) -> Result<DynamicsRun> {
    if !(config.k > 0.0 && config.k.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {}", config.k)));
    }
    if !(settings.t_end >= 0.0 && settings.t_end.is_finite()) {
        return Err(Error::Config(format!("final time must be non-negative, got {}", settings.t_end)));
    }
    config.solver.validate()?;
    let start = Instant::now();
    let order = config.order;
    let total_steps = (settings.t_end / config.k + 1e-9).floor() as usize;
    let mut monitor = Monitor::new(settings.rule);
    let mut energy = Vec::new();
    let mut failure = None;
    let mut unstable = false;
    let mut stopped = false;

    let record = |step: usize, level: &Level, energy: &mut Vec<EnergySample>, mon: &mut Monitor| -> Result<()> {
        if settings.energy_every > 0 && (step % settings.energy_every == 0 || step == total_steps) {
            let e = model.energy_from_source(&level.m, &level.f, order)?.total;
            energy.push(EnergySample { step, t: level.t, energy: e });
            mon.push(step, e);
        }
        Ok(())
    };

    let t0 = m0.time;
    let mut state = match SchemeState::bootstrap_self_start(config, model, m0, t0, None) {
        Ok(s) => s,
        Err(e) if e.is_blow_up() => {
            return Ok(DynamicsRun {
                scheme: config.kind,
                alpha: model.params.alpha,
                k: config.k,
                verdict: Verdict::Unstable,
                failure: Some(format!("bootstrap: {e}")),
                steps: 0,
                t_reached: t0,
                energy,
                final_m: m0.clone(),
                totals: SolveTotals::default(),
                max_unit_deviation: m0.max_unit_deviation(),
                max_relative_increase: 0.0,
                max_drift: 0.0,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        Err(e) => return Err(e),
    };
    let boot: Vec<Level> = state.history().cloned().collect();
    for (s, level) in boot.iter().enumerate() {
        if s > total_steps {
            break;
        }
        record(s, level, &mut energy, &mut monitor)?;
        if !observe(s, level) {
            stopped = true;
            break;
        }
    }
    let mut step = boot.len() - 1;
    while !stopped && step < total_steps {
        if settings.stop_on_anomaly && monitor.violated {
            break;
        }
        match state.step(model, None) {
            Ok(_) => {}
            Err(e) if e.is_blow_up() => {
                failure = Some(format!("step {}: {e}", step + 1));
                unstable = true;
                break;
            }
            Err(e) => return Err(e),
        }
        step += 1;
        let level = state.newest();
        match record(step, level, &mut energy, &mut monitor) {
            Ok(()) => {}
            Err(e) if e.is_blow_up() => {
                failure = Some(format!("step {step}: {e}"));
                unstable = true;
                break;
            }
            Err(e) => return Err(e),
        }
        if !observe(step, level) {
            break;
        }
    }
    let verdict = if unstable {
        Verdict::Unstable
    } else if monitor.violated {
        if failure.is_none() {
            failure = Some(format!("energy rule violated (max relative increase {:.3e}, max drift {:.3e})", monitor.max_increase, monitor.max_drift));
        }
        Verdict::AnomalousEnergy
    } else {
        Verdict::Stable
    };
    let newest = state.newest();
    Ok(DynamicsRun {
        scheme: config.kind,
        alpha: model.params.alpha,
        k: config.k,
        verdict,
        failure,
        steps: step.min(total_steps),
        t_reached: newest.t,
        energy,
        final_m: newest.m.clone(),
        totals: state.totals,
        max_unit_deviation: state.max_unit_deviation,
        max_relative_increase: monitor.max_increase,
        max_drift: monitor.max_drift,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::material::MaterialParams;

    fn sample(t: f64, e: f64) -> EnergySample {
        EnergySample { step: 0, t, energy: e }
    }

    #[test]
    fn t_half_interpolates() {
        let tr = [sample(0.0, 4.0), sample(1.0, 3.0), sample(2.0, 1.0), sample(3.0, 0.0)];
        assert!((t_half(&tr) - 1.5).abs() < 1e-15);
        assert!(t_half(&[]).is_nan());
    }

    #[test]
    fn monitor_flags_increase_after_warmup() {
        let mut m = Monitor::new(EnergyRule::Monotone { jitter: 1e-8, warmup: 2 });
        m.push(0, 1.0);
        m.push(1, 1.5);
        m.push(2, 1.4);
        assert!(!m.violated);
        m.push(3, 1.41);
        assert!(m.violated);
    }

    #[test]
    fn relaxing_wave_is_stable() {
        let grid = GridSpec::line(24, 1.0).unwrap();
        let model = FieldModel::new(MaterialParams::dimensionless(0.05, 0.0, 0.5), grid).unwrap();
        let m0 = VectorField3::from_fn(grid, |x| {
            let a = 0.4 * (std::f64::consts::PI * x[0]).cos();
            [a.cos(), a.sin(), 0.0]
        });
        for kind in SchemeKind::ALL {
            let cfg = SchemeConfig::new(kind, 0.01);
            let mut seen = 0;
            let run = run_dynamics(&model, cfg, &m0, &RunSettings::new(0.5, 0.5), |_, _| {
                seen += 1;
                true
            })
            .unwrap();
            assert_eq!(run.verdict, Verdict::Stable, "{kind}: {:?}", run.failure);
            assert_eq!(run.steps, 50);
            assert_eq!(seen, 51);
            assert_eq!(run.energy.len(), 51);
            assert!(run.final_energy().unwrap() < run.initial_energy().unwrap());
            assert!(run.max_unit_deviation <= 1e-14);
            assert!(run.t_half().is_finite());
        }
    }
}
