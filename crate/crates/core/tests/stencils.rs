use std::f64::consts::PI;

use llg_core::grid::{d1, d2, laplacian, mirror_index, Axis, GridSpec, StencilOrder, VectorField3};
use llg_core::harness::convergence::fit_order;
use proptest::prelude::*;

fn line(n: usize, len: f64, f: impl Fn(f64) -> f64) -> VectorField3 {
    let g = GridSpec::line(n, len).unwrap();
    VectorField3::from_fn(g, |x| [f(x[0]), 0.0, 0.0]).with_ghosts()
}

fn interior_max(a: &VectorField3, skip: usize, want: impl Fn([f64; 3]) -> f64) -> f64 {
    let g = *a.grid();
    let [nx, ny, nz] = g.counts();
    let mut err: f64 = 0.0;
    let inside = |i: usize, n: usize| n == 1 || (i >= skip && i + skip < n);
    for l in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if inside(i, nx) && inside(j, ny) && inside(l, nz) {
                    err = err.max((a.get(i, j, l)[0] - want(g.cell_center(i, j, l))).abs());
                }
            }
        }
    }
    err
}

proptest! {
    #[test]
    fn ghost_fill_is_idempotent(vals in prop::collection::vec(-1.0f64..1.0, 3 * 80)) {
        let g = GridSpec::new([5, 4, 4], [1.0, 0.7, 0.4]).unwrap();
        let n = g.cell_count();
        let f = VectorField3::from_flat(g, &vals[..3 * n]).with_ghosts();
        let again = f.with_ghosts();
        prop_assert_eq!(f, again);
    }

    #[test]
    fn mirror_rule_reflects_about_the_faces(n in 4usize..40, r in 0usize..2) {
        prop_assert_eq!(mirror_index(-1 - r as isize, n), r);
        prop_assert_eq!(mirror_index((n + r) as isize, n), n - 1 - r);
        prop_assert_eq!(mirror_index(r as isize, n), r);
    }

    #[test]
    fn symmetric_field_keeps_symmetric_ghosts(vals in prop::collection::vec(-1.0f64..1.0, 8)) {
        let n = 16;
        let g = GridSpec::line(n, 1.0).unwrap();
        let f = VectorField3::from_fn(g, |x| {
            let i = ((x[0] * n as f64) as usize).min(n - 1);
            let k = i.min(n - 1 - i);
            [vals[k], -vals[k], 0.5 * vals[k]]
        })
        .with_ghosts();
        for q in 1..=2isize {
            for c in 0..3 {
                prop_assert_eq!(f.at(c, -q, 0, 0), f.at(c, n as isize - 1 + q, 0, 0));
            }
        }
    }

    #[test]
    fn second_derivative_is_linear(
        a in prop::collection::vec(-1.0f64..1.0, 24),
        b in prop::collection::vec(-1.0f64..1.0, 24),
        s in -3.0f64..3.0,
    ) {
        let g = GridSpec::line(8, 1.0).unwrap();
        let fa = VectorField3::from_flat(g, &a).with_ghosts();
        let fb = VectorField3::from_flat(g, &b).with_ghosts();
        let comb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let fc = VectorField3::from_flat(g, &comb).with_ghosts();
        for order in [StencilOrder::Second, StencilOrder::Fourth] {
            let la = laplacian(&fa, order).flat();
            let lb = laplacian(&fb, order).flat();
            let lc = laplacian(&fc, order).flat();
            for i in 0..24 {
                prop_assert!((lc[i] - la[i] - s * lb[i]).abs() <= 1e-9 * (1.0 + la[i].abs() + lb[i].abs()));
            }
        }
    }

    #[test]
    fn fourth_order_first_derivative_exact_on_quartics(c in prop::collection::vec(-2.0f64..2.0, 5)) {
        let p = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x.powi(3) + c[4] * x.powi(4);
        let dp = |x: f64| c[1] + 2.0 * c[2] * x + 3.0 * c[3] * x * x + 4.0 * c[4] * x.powi(3);
        let f = line(20, 2.0, p);
        let d = d1(&f, Axis::X, StencilOrder::Fourth);
        prop_assert!(interior_max(&d, 2, |x| dp(x[0])) < 1e-10);
    }

    #[test]
    fn fourth_order_second_derivative_exact_on_quintics(c in prop::collection::vec(-2.0f64..2.0, 6)) {
        let p = |x: f64| (0..6).map(|k| c[k] * x.powi(k as i32)).sum::<f64>();
        let d2p = |x: f64| (2..6).map(|k| c[k] * (k * (k - 1)) as f64 * x.powi(k as i32 - 2)).sum::<f64>();
        let f = line(20, 2.0, p);
        let d = d2(&f, Axis::X, StencilOrder::Fourth);
        prop_assert!(interior_max(&d, 2, |x| d2p(x[0])) < 1e-8);
    }
}

#[test]
fn first_derivative_of_identity_is_one() {
    let f = line(32, 1.0, |x| x);
    for order in [StencilOrder::Second, StencilOrder::Fourth] {
        assert!(interior_max(&d1(&f, Axis::X, order), 2, |_| 1.0) < 1e-12);
    }
}

#[test]
fn second_derivative_of_square_is_two() {
    let f = line(32, 1.0, |x| x * x);
    for order in [StencilOrder::Second, StencilOrder::Fourth] {
        assert!(interior_max(&d2(&f, Axis::X, order), 2, |_| 2.0) < 1e-9);
    }
}

#[test]
fn laplacian_of_radius_squared_is_six() {
    let g = GridSpec::cube(10, 1.0).unwrap();
    let f = VectorField3::from_fn(g, |x| [x[0] * x[0] + x[1] * x[1] + x[2] * x[2], 0.0, 0.0]).with_ghosts();
    assert!(interior_max(&laplacian(&f, StencilOrder::Fourth), 2, |_| 6.0) < 1e-9);
}

fn refinement_order(ns: &[usize], err: impl Fn(usize) -> f64) -> f64 {
    let h: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let e: Vec<f64> = ns.iter().map(|&n| err(n)).collect();
    fit_order(&h, &e).unwrap()
}

#[test]
fn fourth_order_first_derivative_converges() {
    let p = refinement_order(&[32, 48, 64, 96, 128], |n| {
        let f = line(n, 1.0, |x| (2.0 * PI * x).sin());
        interior_max(&d1(&f, Axis::X, StencilOrder::Fourth), 2, |x| 2.0 * PI * (2.0 * PI * x[0]).cos())
    });
    assert!((p - 4.0).abs() <= 0.1, "order {p}");
}

#[test]
fn fourth_order_neumann_second_derivative_converges() {
    // cos(pi x) has zero slope at both ends, so the mirror ghosts are consistent
    let p = refinement_order(&[16, 24, 32, 48, 64], |n| {
        let f = line(n, 1.0, |x| (PI * x).cos());
        interior_max(&d2(&f, Axis::X, StencilOrder::Fourth), 0, |x| -PI * PI * (PI * x[0]).cos())
    });
    assert!((p - 4.0).abs() <= 0.2, "order {p}");
}

#[test]
fn second_order_laplacian_converges() {
    let p = refinement_order(&[16, 24, 32, 48, 64], |n| {
        let f = line(n, 1.0, |x| (PI * x).cos());
        interior_max(&laplacian(&f, StencilOrder::Second), 0, |x| -PI * PI * (PI * x[0]).cos())
    });
    assert!((p - 2.0).abs() <= 0.1, "order {p}");
}
