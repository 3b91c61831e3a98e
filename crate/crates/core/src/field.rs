//! Composite source term and the Gibbs free energy.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::demag::DemagKernel;
use crate::error::{Error, Result};
use crate::grid::{dot, grad_norm_sq, laplacian, GridSpec, StencilOrder, VectorField3};
use crate::material::MaterialParams;

/// Uniaxial anisotropy field `(0, -q m2, -q m3)` (easy axis along x).
pub fn anisotropy_field(m: &VectorField3, q: f64) -> VectorField3 {
    let mut out = VectorField3::zeros(*m.grid());
    out.time = m.time;
    m.for_each_cell(|i, j, l, _| {
        let v = m.get(i, j, l);
        out.set(i, j, l, [0.0, -q * v[1], -q * v[2]]);
    });
    out
}

/// `f = -q (m2 e2 + m3 e3) + h_s + h_e`.
pub fn composite_f(m: &VectorField3, p: &MaterialParams, kern: Option<&DemagKernel>) -> Result<VectorField3> {
    let mut f = anisotropy_field(m, p.q);
    if p.stray_enabled {
        let kern = kern.ok_or_else(|| Error::Config("stray field enabled without a demag kernel".into()))?;
        let hs = kern.stray_field(m)?;
        f.add_scaled(1.0, &hs);
    }
    if p.he != [0.0; 3] {
        f.add_uniform(p.he);
    }
    Ok(f)
}

/// Discretization of the exchange energy density.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeForm {
    /// `|D1 m|^2` summed over axes.
    Gradient,
    /// `-m . Lap_h m`, the quadratic form of the discrete Laplacian used by the dynamics.
    #[default]
    Laplacian,
}

/// Energy contributions in J (or in `mu0 Ms^2 L^3` units without SI constants).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub exchange: f64,
    pub anisotropy: f64,
    pub zeeman: f64,
    pub demag: f64,
    pub total: f64,
}

/// Material parameters plus the optional demag kernel: everything needed to turn `m`
/// into `f` or an energy.
#[derive(Clone, Debug)]
pub struct FieldModel {
    pub params: MaterialParams,
    pub kernel: Option<Arc<DemagKernel>>,
    pub exchange: ExchangeForm,
}

impl FieldModel {
    /// Builds the demag kernel when the stray field is enabled.
    pub fn new(params: MaterialParams, grid: GridSpec) -> Result<Self> {
        params.validate()?;
        let kernel = if params.stray_enabled {
            Some(Arc::new(DemagKernel::new(grid)?))
        } else {
            None
        };
        Ok(Self {
            params,
            kernel,
            exchange: ExchangeForm::default(),
        })
    }

    /// Reuses an existing kernel (it must belong to the same grid).
    pub fn with_kernel(params: MaterialParams, kernel: Option<Arc<DemagKernel>>) -> Result<Self> {
        params.validate()?;
        if params.stray_enabled && kernel.is_none() {
            return Err(Error::Config("stray field enabled without a demag kernel".into()));
        }
        Ok(Self {
            params,
            kernel,
            exchange: ExchangeForm::default(),
        })
    }

    pub fn source(&self, m: &VectorField3) -> Result<VectorField3> {
        composite_f(m, &self.params, self.kernel.as_deref())
    }

    pub fn energy(&self, m: &VectorField3, order: StencilOrder) -> Result<EnergyBreakdown> {
        energy_with(m, &self.params, self.kernel.as_deref(), order, self.exchange)
    }

    /// Energy of `m` with the stray field recovered from a source term `f = source(m)`.
    pub fn energy_from_source(&self, m: &VectorField3, f: &VectorField3, order: StencilOrder) -> Result<EnergyBreakdown> {
        m.grid().ensure_same(f.grid())?;
        let p = &self.params;
        let g = m.with_ghosts();
        let mut an_sum = 0.0;
        let mut ze_sum = 0.0;
        let mut fm_sum = 0.0;
        m.for_each_cell(|i, j, l, _| {
            let v = m.get(i, j, l);
            an_sum += v[1] * v[1] + v[2] * v[2];
            ze_sum += dot(p.he, v);
            fm_sum += dot(f.get(i, j, l), v);
        });
        let dm_sum = if p.stray_enabled {
            fm_sum + p.q * an_sum - ze_sum
        } else {
            0.0
        };
        finish_energy(&g, p, order, self.exchange, an_sum, ze_sum, dm_sum)
    }
}

/// Total free energy with the gradient form of the exchange term.
pub fn energy(m: &VectorField3, p: &MaterialParams, kern: Option<&DemagKernel>) -> Result<f64> {
    Ok(energy_with(m, p, kern, StencilOrder::Fourth, ExchangeForm::Gradient)?.total)
}

pub fn energy_with(
    m: &VectorField3,
    p: &MaterialParams,
    kern: Option<&DemagKernel>,
    order: StencilOrder,
    exchange: ExchangeForm,
) -> Result<EnergyBreakdown> {
    let g = m.with_ghosts();
    let mut an_sum = 0.0;
    let mut ze_sum = 0.0;
    for v in g.cells() {
        an_sum += v[1] * v[1] + v[2] * v[2];
        ze_sum += dot(p.he, v);
    }
    let dm_sum = if p.stray_enabled {
        let kern = kern.ok_or_else(|| Error::Config("stray field enabled without a demag kernel".into()))?;
        kern.stray_field(&g)?.dot_sum(&g)
    } else {
        0.0
    };
    finish_energy(&g, p, order, exchange, an_sum, ze_sum, dm_sum)
}

fn finish_energy(
    g: &VectorField3,
    p: &MaterialParams,
    order: StencilOrder,
    exchange: ExchangeForm,
    an_sum: f64,
    ze_sum: f64,
    dm_sum: f64,
) -> Result<EnergyBreakdown> {
    let w = 0.5 * p.energy_scale() * g.grid().cell_volume();
    let ex_sum: f64 = match exchange {
        ExchangeForm::Gradient => grad_norm_sq(g, order).values().iter().sum(),
        ExchangeForm::Laplacian => -g.dot_sum(&laplacian(g, order)),
    };
    let e = EnergyBreakdown {
        exchange: w * p.epsilon * ex_sum,
        anisotropy: w * p.q * an_sum,
        zeeman: -2.0 * w * ze_sum,
        demag: -w * dm_sum,
        total: 0.0,
    };
    let total = e.exchange + e.anisotropy + e.zeeman + e.demag;
    if !total.is_finite() {
        return Err(Error::NonFinite("energy"));
    }
    Ok(EnergyBreakdown { total, ..e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::PhysicalConstants;

    #[test]
    fn anisotropy_examples() {
        let grid = GridSpec::line(4, 1.0).unwrap();
        let m = VectorField3::uniform(grid, [1.0, 0.0, 0.0]);
        assert!(anisotropy_field(&m, 0.7).cells().all(|v| v == [0.0; 3]));
        let m = VectorField3::uniform(grid, [0.0, 1.0, 0.0]);
        assert!(anisotropy_field(&m, 0.5).cells().all(|v| v == [0.0, -0.5, 0.0]));
    }

    #[test]
    fn applied_field_only() {
        let grid = GridSpec::line(5, 1.0).unwrap();
        let p = MaterialParams::dimensionless(1.0, 0.0, 0.1).with_field([0.1, 0.0, 0.0]);
        let m = VectorField3::uniform(grid, [0.0, 0.6, 0.8]);
        let f = composite_f(&m, &p, None).unwrap();
        assert!(f.cells().all(|v| v == [0.1, 0.0, 0.0]));
    }

    #[test]
    fn stray_without_kernel_is_config_error() {
        let grid = GridSpec::line(5, 1.0).unwrap();
        let mut p = MaterialParams::dimensionless(1.0, 0.0, 0.1);
        p.stray_enabled = true;
        let m = VectorField3::uniform(grid, [1.0, 0.0, 0.0]);
        assert!(composite_f(&m, &p, None).unwrap_err().is_config());
    }

    #[test]
    fn uniform_energies() {
        let pc = PhysicalConstants::permalloy();
        let p = MaterialParams::from_physical(pc, 1.0, [0.0; 3], false).unwrap();
        let grid = GridSpec::new([4, 4, 4], [20.0, 20.0, 20.0]).unwrap();
        let m = VectorField3::uniform(grid, [1.0, 0.0, 0.0]);
        assert_eq!(energy(&m, &p, None).unwrap(), 0.0);
        let m = VectorField3::uniform(grid, [0.0, 1.0, 0.0]);
        let expect = 0.5 * pc.energy_density_unit() * p.q * (20e-9f64).powi(3);
        let got = energy(&m, &p, None).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect);
    }
}
