use std::f64::consts::PI;

use llg_core::grid::{cross, GridSpec};
use llg_core::harness::angle_field;
use llg_core::harness::convergence::{fit_order, run_temporal_convergence};
use llg_core::harness::oracle::random_unit_field;
use llg_core::harness::ManufacturedSolution;
use llg_core::integrators::{Forcing, SchemeKind};

/// Fourth-order central Laplacian of the exact solution, independent of the closed forms.
fn fd_laplacian(ms: &ManufacturedSolution, x: [f64; 3], t: f64) -> [f64; 3] {
    let d = 1e-3;
    let mut out = [0.0; 3];
    for a in 0..ms.dim {
        let at = |s: f64| {
            let mut y = x;
            y[a] += s * d;
            ms.exact(y, t)
        };
        let (m2, m1, m0, p1, p2) = (at(-2.0), at(-1.0), at(0.0), at(1.0), at(2.0));
        for c in 0..3 {
            out[c] += (-m2[c] + 16.0 * m1[c] - 30.0 * m0[c] + 16.0 * p1[c] - p2[c]) / (12.0 * d * d);
        }
    }
    out
}

/// `-m x Lap m - alpha m x (m x Lap m) + g`, the forced model in Landau-Lifshitz form.
fn forced_rhs(ms: &ManufacturedSolution, x: [f64; 3], t: f64) -> [f64; 3] {
    let m = ms.exact(x, t);
    let l = fd_laplacian(ms, x, t);
    let mxl = cross(m, l);
    let mmxl = cross(m, mxl);
    let g = ms.g(x, t);
    std::array::from_fn(|c| -mxl[c] - ms.alpha * mmxl[c] + g[c])
}

fn residual(ms: &ManufacturedSolution, k: f64) -> f64 {
    let t = 0.3;
    let mut worst: f64 = 0.0;
    for s in 0..50 {
        let x = [0.013 + 0.0197 * s as f64, 0.77 - 0.011 * s as f64, 0.05 + 0.017 * s as f64];
        let a = ms.exact(x, t);
        let b = ms.exact(x, t + k);
        let r = forced_rhs(ms, x, t);
        for c in 0..3 {
            worst = worst.max((b[c] - a[c] - k * r[c]).abs());
        }
    }
    worst
}

#[test]
fn forcing_leaves_a_second_order_residual() {
    for dim in [1, 3] {
        let ms = ManufacturedSolution::new(dim, 0.3);
        let ks = [0.04, 0.02, 0.01, 0.005];
        let rs: Vec<f64> = ks.iter().map(|&k| residual(&ms, k)).collect();
        let p = fit_order(&ks, &rs).unwrap();
        assert!((p - 2.0).abs() < 0.1, "dim {dim}: order {p}, residuals {rs:?}");
    }
}

#[test]
fn order_fit_survives_dropping_a_row() {
    let r = run_temporal_convergence(SchemeKind::Bdf3Proposed, 1).unwrap();
    let ks: Vec<f64> = r.rows.iter().map(|e| e.k).collect();
    for norm in 0..3 {
        let e: Vec<f64> = r.rows.iter().map(|e| [e.linf, e.l2, e.h1][norm]).collect();
        let full = fit_order(&ks, &e).unwrap();
        for skip in 0..ks.len() {
            let keep = |v: &[f64]| v.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, x)| *x).collect::<Vec<_>>();
            let part = fit_order(&keep(&ks), &keep(&e)).unwrap();
            assert!((part - full).abs() < 0.15, "norm {norm} without row {skip}: {part} vs {full}");
        }
    }
}

#[test]
fn angle_field_is_in_range() {
    let g = GridSpec::new([9, 7, 1], [1.0, 1.0, 0.1]).unwrap();
    let m = random_unit_field(g, 5);
    let a = angle_field(&m);
    for (v, c) in a.values().iter().zip(m.cells()) {
        assert!(v.is_finite() && *v > -PI && *v <= PI);
        assert!((v - c[1].atan2(c[0])).abs() < 1e-15);
    }
}
