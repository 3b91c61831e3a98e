use std::f64::consts::PI;
use std::sync::Arc;

use llg_core::demag::{demag_tensor, newell_tensor, DemagKernel};
use llg_core::field::{energy_with, ExchangeForm, FieldModel};
use llg_core::grid::{GridSpec, StencilOrder, VectorField3};
use llg_core::harness::oracle::{random_unit_field, stray_fft_vs_direct};
use llg_core::material::{MaterialParams, PhysicalConstants};

#[test]
fn fft_matches_direct_sum_on_assorted_grids() {
    let cases = [
        ([4, 4, 1], [1.0, 1.0, 0.25]),
        ([7, 5, 1], [2.1, 1.0, 0.1]),
        ([4, 6, 5], [0.8, 1.2, 1.0]),
        ([9, 4, 4], [3.0, 1.0, 1.0]),
    ];
    for (seed, (counts, lengths)) in cases.into_iter().enumerate() {
        let err = stray_fft_vs_direct(counts, lengths, 100 + seed as u64).unwrap();
        assert!(err <= 1e-10, "{counts:?}: {err:e}");
    }
}

#[test]
fn stray_field_is_reciprocal() {
    let g = GridSpec::new([6, 5, 4], [1.5, 1.0, 0.6]).unwrap();
    let kernel = DemagKernel::new(g).unwrap();
    let a = random_unit_field(g, 1);
    let b = random_unit_field(g, 2);
    let ab = a.dot_sum(&kernel.stray_field(&b).unwrap());
    let ba = b.dot_sum(&kernel.stray_field(&a).unwrap());
    assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0), "{ab} vs {ba}");
    // the demag energy is non-negative
    assert!(a.dot_sum(&kernel.stray_field(&a).unwrap()) < 0.0);
}

fn point_dipole(r: [f64; 3], d: [f64; 3]) -> [f64; 6] {
    let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    let s = d[0] * d[1] * d[2] / (4.0 * PI * r2 * r2 * r2.sqrt());
    [
        s * (3.0 * r[0] * r[0] - r2),
        s * (3.0 * r[1] * r[1] - r2),
        s * (3.0 * r[2] * r[2] - r2),
        s * 3.0 * r[0] * r[1],
        s * 3.0 * r[0] * r[2],
        s * 3.0 * r[1] * r[2],
    ]
}

#[test]
fn far_field_tends_to_a_point_dipole() {
    let d = [1.0, 0.8, 0.5];
    for r in [[30.0, 4.0, 2.0], [3.0, 25.0, -6.0], [-12.0, 9.0, 20.0]] {
        let n = demag_tensor(r, d);
        let p = point_dipole(r, d);
        let scale = p.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for c in 0..6 {
            assert!((n[c] - p[c]).abs() <= 1e-2 * scale, "{r:?} component {c}");
        }
    }
}

#[test]
fn newell_tensor_is_traceless_off_the_diagonal_cell() {
    let d = [1.0, 0.7, 0.4];
    let t0 = newell_tensor([0.0; 3], d);
    assert!((t0[0] + t0[1] + t0[2] + 1.0).abs() < 1e-12);
    for r in [[1.0, 0.0, 0.0], [0.0, 0.7, 0.0], [2.0, -1.4, 0.4], [0.0, 0.0, 1.2]] {
        let t = newell_tensor(r, d);
        assert!((t[0] + t[1] + t[2]).abs() < 1e-10, "{r:?}");
    }
}

#[test]
fn tensor_switch_is_continuous() {
    let d = [1.0, 1.0, 1.0];
    for dist in [5.0, 6.0, 8.0, 10.0] {
        let r = [dist, 0.6 * dist, 0.3 * dist];
        let a = newell_tensor(r, d);
        let b = llg_core::demag::dipole_tensor(r, d);
        let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for c in 0..6 {
            assert!((a[c] - b[c]).abs() <= 1e-6 * scale, "{dist} component {c}");
        }
    }
}

#[test]
fn thin_film_has_shape_anisotropy() {
    let g = GridSpec::new([32, 32, 1], [32.0, 32.0, 0.5]).unwrap();
    let kernel = DemagKernel::new(g).unwrap();
    let hz = kernel.stray_field(&VectorField3::uniform(g, [0.0, 0.0, 1.0])).unwrap().get(16, 16, 0);
    assert!((hz[2] + 1.0).abs() < 0.05, "{hz:?}");
    let hx = kernel.stray_field(&VectorField3::uniform(g, [1.0, 0.0, 0.0])).unwrap().get(16, 16, 0);
    assert!(hx[0].abs() < 0.05 && hx[0] < 0.0, "{hx:?}");
}

#[test]
fn energy_from_source_matches_direct_energy() {
    let pc = PhysicalConstants::permalloy();
    let g = GridSpec::new([8, 8, 1], [6.0, 6.0, 1.0]).unwrap();
    let p = MaterialParams::from_physical(pc, 1.0, [3.0, -1.0, 0.5], true).unwrap();
    let model = FieldModel::with_kernel(p, Some(Arc::new(DemagKernel::new(g).unwrap()))).unwrap();
    let m = random_unit_field(g, 12);
    let f = model.source(&m).unwrap();
    for order in [StencilOrder::Second, StencilOrder::Fourth] {
        let a = model.energy(&m, order).unwrap();
        let b = model.energy_from_source(&m, &f, order).unwrap();
        assert!((a.total - b.total).abs() <= 1e-12 * a.total.abs(), "{a:?} {b:?}");
        assert!((a.demag - b.demag).abs() <= 1e-12 * a.demag.abs());
    }
}

#[test]
fn exchange_forms_agree_on_smooth_states() {
    let g = GridSpec::line(64, 1.0).unwrap();
    let p = MaterialParams::dimensionless(1.0, 0.0, 0.0);
    let m = VectorField3::from_fn(g, |x| {
        let th = 0.5 * PI * x[0];
        [th.cos(), th.sin(), 0.0]
    });
    // |m'|^2 integrates to (pi/2)^2 over the unit line
    let exact = 0.5 * (0.5 * PI).powi(2);
    for form in [ExchangeForm::Gradient, ExchangeForm::Laplacian] {
        let e = energy_with(&m, &p, None, StencilOrder::Fourth, form).unwrap();
        assert!((e.exchange - exact).abs() < 2e-2 * exact, "{form:?}: {}", e.exchange);
    }
}

#[test]
fn zeeman_energy_of_an_aligned_state() {
    let g = GridSpec::new([4, 4, 4], [2.0, 2.0, 2.0]).unwrap();
    let p = MaterialParams::dimensionless(1.0, 0.0, 0.0).with_field([0.0, 0.3, 0.0]);
    let m = VectorField3::uniform(g, [0.0, 1.0, 0.0]);
    let e = energy_with(&m, &p, None, StencilOrder::Fourth, ExchangeForm::Gradient).unwrap();
    assert!((e.zeeman + 0.3 * 8.0).abs() < 1e-12);
    assert_eq!(e.exchange, 0.0);
}
