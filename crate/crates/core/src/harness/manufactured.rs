//! Closed-form exact solutions on the unit interval or unit cube.
//!
//! `m_e = (cos u sin t, sin u sin t, cos t)` with `u = prod_a cos(pi x_a)` over the active
//! axes; the forcing `g = m_t - alpha Lap m - alpha |grad m|^2 m + m x Lap m` makes it an
//! exact solution of the model with `eps = 1` and `f = 0`.

use std::f64::consts::PI;

use crate::error::Result;
use crate::grid::{cross, GridSpec};
use crate::integrators::Forcing;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSolution {
    /// 1 or 3 active axes.
    pub dim: usize,
    pub alpha: f64,
}

struct Phase {
    u: f64,
    grad: [f64; 3],
    lap: f64,
}

impl ManufacturedSolution {
    pub fn new(dim: usize, alpha: f64) -> Self {
        assert!(dim == 1 || dim == 3, "manufactured solutions exist in 1D and 3D");
        Self { dim, alpha }
    }

    /// Uniform grid with `n` cells per active axis on the unit domain.
    pub fn grid(&self, n: usize) -> Result<GridSpec> {
        if self.dim == 1 {
            GridSpec::line(n, 1.0)
        } else {
            GridSpec::cube(n, 1.0)
        }
    }

    fn phase(&self, x: [f64; 3]) -> Phase {
        let c: Vec<f64> = (0..self.dim).map(|a| (PI * x[a]).cos()).collect();
        let s: Vec<f64> = (0..self.dim).map(|a| (PI * x[a]).sin()).collect();
        let u: f64 = c.iter().product();
        let mut grad = [0.0; 3];
        for a in 0..self.dim {
            let others: f64 = (0..self.dim).filter(|&b| b != a).map(|b| c[b]).product();
            grad[a] = -PI * s[a] * others;
        }
        Phase {
            u,
            grad,
            lap: -(self.dim as f64) * PI * PI * u,
        }
    }

    pub fn exact(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let u = self.phase(x).u;
        [u.cos() * t.sin(), u.sin() * t.sin(), t.cos()]
    }

    /// `d m_e / d x_a` for each axis (rows).
    pub fn gradient(&self, x: [f64; 3], t: f64) -> [[f64; 3]; 3] {
        let p = self.phase(x);
        let st = t.sin();
        let mut out = [[0.0; 3]; 3];
        for a in 0..self.dim {
            out[a] = [-p.u.sin() * st * p.grad[a], p.u.cos() * st * p.grad[a], 0.0];
        }
        out
    }

    pub fn laplacian(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let p = self.phase(x);
        let st = t.sin();
        let g2: f64 = p.grad.iter().map(|v| v * v).sum();
        [
            (-p.u.cos() * g2 - p.u.sin() * p.lap) * st,
            (-p.u.sin() * g2 + p.u.cos() * p.lap) * st,
            0.0,
        ]
    }

    pub fn time_derivative(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let u = self.phase(x).u;
        [u.cos() * t.cos(), u.sin() * t.cos(), -t.sin()]
    }

    pub fn grad_norm_sq(&self, x: [f64; 3], t: f64) -> f64 {
        let p = self.phase(x);
        let g2: f64 = p.grad.iter().map(|v| v * v).sum();
        g2 * t.sin() * t.sin()
    }

    /// Right-hand side of the model without forcing: `-m x Lap m + alpha (Lap m + |grad m|^2 m)`.
    pub fn model_rhs(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let m = self.exact(x, t);
        let l = self.laplacian(x, t);
        let g2 = self.grad_norm_sq(x, t);
        let mxl = cross(m, l);
        std::array::from_fn(|c| -mxl[c] + self.alpha * (l[c] + g2 * m[c]))
    }
}

impl Forcing for ManufacturedSolution {
    fn g(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let dt = self.time_derivative(x, t);
        let rhs = self.model_rhs(x, t);
        std::array::from_fn(|c| dt[c] - rhs[c])
    }
}
