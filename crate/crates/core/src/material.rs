//! Material parameters and the physical/nondimensional unit map.
//!
//! Lengths are measured in `L`, fields in `mu0 * Ms` and time in `tau = 1 / (mu0 * gamma * Ms)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permeability [H/m].
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Gyromagnetic ratio used for the time unit [rad/(s T)].
pub const GAMMA: f64 = 1.7595e11;

/// SI material constants together with the length unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Vacuum permeability [H/m].
    pub mu0: f64,
    /// Saturation magnetization [A/m].
    pub ms: f64,
    /// Exchange constant [J/m].
    pub cex: f64,
    /// Uniaxial anisotropy constant [J/m^3].
    pub ku: f64,
    /// Characteristic length [m].
    pub length: f64,
    /// Gyromagnetic ratio [rad/(s T)].
    pub gamma: f64,
}

impl PhysicalConstants {
    /// Permalloy with a 1 nm length unit.
    pub fn permalloy() -> Self {
        Self {
            mu0: MU0,
            ms: 8.0e5,
            cex: 1.3e-11,
            ku: 100.0,
            length: 1.0e-9,
            gamma: GAMMA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("mu0", self.mu0),
            ("ms", self.ms),
            ("cex", self.cex),
            ("length", self.length),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.ku.is_finite() && self.ku >= 0.0) {
            problems.push(format!("ku must be non-negative, got {}", self.ku));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigList(problems))
        }
    }

    /// `Cex / (mu0 Ms^2 L^2)`.
    pub fn epsilon(&self) -> f64 {
        self.cex / (self.mu0 * self.ms * self.ms * self.length * self.length)
    }

    /// `Ku / (mu0 Ms^2)`.
    pub fn q(&self) -> f64 {
        self.ku / (self.mu0 * self.ms * self.ms)
    }

    /// Time unit `1 / (mu0 gamma Ms)` [s].
    pub fn tau(&self) -> f64 {
        1.0 / (self.mu0 * self.gamma * self.ms)
    }

    /// Field unit `mu0 Ms` [T].
    pub fn field_unit(&self) -> f64 {
        self.mu0 * self.ms
    }

    /// Energy density unit `mu0 Ms^2` [J/m^3].
    pub fn energy_density_unit(&self) -> f64 {
        self.mu0 * self.ms * self.ms
    }

    pub fn seconds_to_time(&self, s: f64) -> f64 {
        s / self.tau()
    }

    pub fn time_to_seconds(&self, t: f64) -> f64 {
        t * self.tau()
    }

    pub fn meters_to_length(&self, m: f64) -> f64 {
        m / self.length
    }

    pub fn length_to_meters(&self, x: f64) -> f64 {
        x * self.length
    }

    /// Flux density in mT to the dimensionless field.
    pub fn millitesla_to_field(&self, mt: f64) -> f64 {
        mt * 1e-3 / self.field_unit()
    }

    /// Dimensionless velocity (lengths per time unit) to m/s.
    pub fn velocity_to_si(&self, v: f64) -> f64 {
        v * self.length / self.tau()
    }

    /// Exchange length `sqrt(2 Cex / (mu0 Ms^2))` [m].
    pub fn exchange_length(&self) -> f64 {
        (2.0 * self.cex / self.energy_density_unit()).sqrt()
    }
}

/// Parameters of the dimensionless model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub epsilon: f64,
    pub q: f64,
    pub alpha: f64,
    /// Uniform applied field in units of `mu0 Ms`.
    pub he: [f64; 3],
    pub stray_enabled: bool,
    /// Present when the run was configured from SI constants.
    pub physical: Option<PhysicalConstants>,
}

impl MaterialParams {
    /// Purely dimensionless parameters.
    pub fn dimensionless(epsilon: f64, q: f64, alpha: f64) -> Self {
        Self {
            epsilon,
            q,
            alpha,
            he: [0.0; 3],
            stray_enabled: false,
            physical: None,
        }
    }

    /// Parameters derived from SI constants. `he_mt` is the applied flux density in mT.
    pub fn from_physical(pc: PhysicalConstants, alpha: f64, he_mt: [f64; 3], stray_enabled: bool) -> Result<Self> {
        pc.validate()?;
        let p = Self {
            epsilon: pc.epsilon(),
            q: pc.q(),
            alpha,
            he: he_mt.map(|b| pc.millitesla_to_field(b)),
            stray_enabled,
            physical: Some(pc),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_field(mut self, he: [f64; 3]) -> Self {
        self.he = he;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            problems.push(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            problems.push(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if !(self.q.is_finite() && self.q >= 0.0) {
            problems.push(format!("q must be non-negative, got {}", self.q));
        }
        if self.he.iter().any(|v| !v.is_finite()) {
            problems.push("applied field must be finite".to_string());
        }
        if let Some(pc) = &self.physical {
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
            if rel(self.epsilon, pc.epsilon()) > 1e-12 {
                problems.push(format!(
                    "epsilon {} inconsistent with Cex/(mu0 Ms^2 L^2) = {}",
                    self.epsilon,
                    pc.epsilon()
                ));
            }
            if pc.q() != 0.0 && rel(self.q, pc.q()) > 1e-12 || pc.q() == 0.0 && self.q != 0.0 {
                problems.push(format!("q {} inconsistent with Ku/(mu0 Ms^2) = {}", self.q, pc.q()));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigList(problems))
        }
    }

    /// Energy of a unit dimensionless volume in J, or 1 without SI constants.
    pub fn energy_scale(&self) -> f64 {
        match &self.physical {
            Some(pc) => pc.energy_density_unit() * pc.length.powi(3),
            None => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permalloy_units() {
        let pc = PhysicalConstants::permalloy();
        assert!((pc.tau() - 5.6533e-12).abs() < 1e-15);
        assert!((pc.seconds_to_time(1e-12) - 0.176887).abs() < 1e-5);
        assert!((pc.millitesla_to_field(5.0) - 4.9736e-3).abs() < 1e-7);
        assert!((pc.q() - 1.2434e-4).abs() < 1e-8);
        // Cex / (mu0 Ms^2) is 16.16 nm^2
        assert!((pc.epsilon() - 16.1643).abs() < 1e-3);
    }

    #[test]
    fn physical_params_are_consistent() {
        let p = MaterialParams::from_physical(PhysicalConstants::permalloy(), 1.0, [5.0, 0.0, 0.0], true).unwrap();
        assert!(p.validate().is_ok());
        let mut bad = p;
        bad.epsilon *= 1.0 + 1e-9;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rejects_negative_damping() {
        assert!(MaterialParams::dimensionless(1.0, 0.0, -0.1).validate().is_err());
        assert!(MaterialParams::dimensionless(0.0, 0.0, 0.1).validate().is_err());
    }
}
