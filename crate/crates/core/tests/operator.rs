use mesofluct::operator::{free_resolvent_entry, resolvent_column};
use mesofluct::*;
use num_complex::Complex64;

fn perturbed(seed: u64) -> WeightSpec {
    WeightSpec::PerturbedFree { beta: 0.7, amplitude: 0.3, seed }
}

#[test]
fn resolvent_identity_on_an_interior_window() {
    let (l1, l2) = (Complex64::new(0.4, 0.5), Complex64::new(-0.3, 0.8));
    let (inner, rows) = (260, 40);
    let op = JacobiOperator::for_indices(&perturbed(3), inner, &[l1, l2]).unwrap();
    let a = resolvent_window(&op, &SpectralPoint::new(l1), 1..=rows, 1..=inner).unwrap();
    let b = resolvent_window(&op, &SpectralPoint::new(l2), 1..=inner, 1..=rows).unwrap();
    let g1 = resolvent_window(&op, &SpectralPoint::new(l1), 1..=rows, 1..=rows).unwrap();
    let g2 = resolvent_window(&op, &SpectralPoint::new(l2), 1..=rows, 1..=rows).unwrap();
    let prod = &a.entries * &b.entries;
    let mut worst = 0.0f64;
    for j in 0..rows {
        for k in 0..rows {
            let lhs = g1.entries[(j, k)] - g2.entries[(j, k)];
            worst = worst.max((lhs - (l1 - l2) * prod[(j, k)]).norm());
        }
    }
    assert!(worst <= 1e-9, "{worst:e}");
}

#[test]
fn enlarging_the_buffer_leaves_the_window_unchanged() {
    let l = Complex64::new(0.7, 0.3);
    let z = SpectralPoint::new(l);
    let base = JacobiOperator::for_indices(&perturbed(5), 30, &[l]).unwrap();
    let w = resolvent_window(&base, &z, 1..=30, 1..=30).unwrap();
    let big = w.truncation + w.truncation / 2;
    let op = JacobiOperator::from_spec(&perturbed(5), big).unwrap();
    for k in 1..=30 {
        let col = resolvent_column(&op, l, k, big).unwrap();
        for j in 1..=30 {
            assert!((w.get(j, k) - col[j - 1]).norm() <= 1e-12, "({j},{k})");
        }
    }
}

#[test]
fn diagonal_imaginary_part_is_the_column_norm() {
    let l = Complex64::new(-1.1, 0.2);
    let dim = 400;
    let op = JacobiOperator::from_spec(&perturbed(9), dim).unwrap();
    for k in [1, 17, 200, 400] {
        let col = resolvent_column(&op, l, k, dim).unwrap();
        let norm: f64 = col.iter().map(|g| g.norm_sqr()).sum();
        assert!((col[k - 1].im - l.im * norm).abs() <= 1e-12 * col[k - 1].im.abs().max(1.0));
    }
}

#[test]
fn herglotz_and_norm_bounds() {
    let l = Complex64::new(0.2, 0.05);
    let op = JacobiOperator::for_indices(&perturbed(11), 120, &[l]).unwrap();
    let w = resolvent_window(&op, &SpectralPoint::new(l), 1..=120, 1..=120).unwrap();
    for j in 1..=120 {
        assert!(w.get(j, j).im > 0.0);
        for k in 1..=120 {
            assert!((w.get(j, k) - w.get(k, j)).norm() <= 1e-12);
        }
    }
    assert!(w.max_column_norm() <= 1.0 / l.im);
}

#[test]
fn omega_first_order_expansion() {
    let (x0, eta, alpha) = (0.6f64, Complex64::new(0.3, 1.2), 0.5);
    let s = (4.0 - x0 * x0).sqrt();
    let mut scaled = Vec::new();
    for n in [100usize, 1000, 10000, 100000] {
        let eps = (n as f64).powf(-alpha);
        let w = omega(x0 + eta * eps).unwrap();
        let approx = Complex64::new(x0, -s) / 2.0 * (1.0 + Complex64::i() * eta * eps / s);
        scaled.push((w - approx).norm() / (eps * eps));
    }
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi / lo < 1.5, "{scaled:?}");
}

#[test]
fn free_entry_tends_to_its_toeplitz_part() {
    let l = Complex64::new(0.5, 0.4);
    let w = omega(l).unwrap();
    let toeplitz = |d: usize| w.powu(d as u32) / (w - w.inv());
    for d in [0usize, 3] {
        let e = free_resolvent_entry(l, 200, 200 + d).unwrap();
        assert!((e - toeplitz(d)).norm() < 1e-12);
    }
}

#[test]
fn free_operator_certifies_at_radius_one_hundred() {
    let z = SpectralPoint::new(Complex64::new(1.0, 0.5));
    let op = JacobiOperator::for_indices(&WeightSpec::free(), 201, &[z.lambda]).unwrap();
    let r = certify_combes_thomas(&op, &z, 100).unwrap();
    assert!(r.max_ratio <= 1.0);
    let (_, g0, b0) = r.rows[0];
    assert!(g0 <= 1.0 / z.im() && (b0 - 2.0 / z.im()).abs() < 1e-15);
}
