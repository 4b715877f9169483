use mesofluct::measures::fit_tail_decay;
use mesofluct::operator::free_resolvent_entry;
use mesofluct::quadrature::QuadratureRule;
use mesofluct::*;
use num_complex::Complex64;
use proptest::prelude::*;

struct Identity;

impl RealFunction for Identity {
    fn value(&self, x: f64) -> f64 {
        x
    }
    fn derivative(&self, _: f64) -> f64 {
        1.0
    }
}

fn upper_half_plane() -> impl Strategy<Value = Complex64> {
    (-5.0f64..5.0, 0.01f64..5.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn symbol(max_cutoff: usize) -> impl Strategy<Value = LaurentSymbol> {
    (0..=max_cutoff)
        .prop_flat_map(|k| prop::collection::vec(-1.0f64..1.0, 2 * k + 1))
        .prop_map(|c| LaurentSymbol::new(c).unwrap())
}

fn batch_from(values: &[f64]) -> SampleBatch {
    SampleBatch {
        indices: (0..values.len()).map(|i| vec![i]).collect(),
        samples: values.iter().map(|&v| vec![v]).collect(),
        seed: 0,
        count: values.len(),
        n: 1,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn omega_inverts_the_joukowski_map(l in upper_half_plane()) {
        let w = omega(l).unwrap();
        prop_assert!(w.norm() < 1.0);
        prop_assert!((w + w.inv() - l).norm() <= 1e-12 * l.norm().max(1.0));
    }

    #[test]
    fn free_resolvent_entries_are_symmetric(l in upper_half_plane(), j in 1usize..60, k in 1usize..60) {
        let a = free_resolvent_entry(l, j, k).unwrap();
        let b = free_resolvent_entry(l, k, j).unwrap();
        prop_assert!((a - b).norm() <= 1e-14 * a.norm().max(1e-300));
    }

    #[test]
    fn perturbed_resolvent_is_herglotz(seed in 0u64..1000, re in -2.5f64..2.5, im in 0.05f64..2.0) {
        let l = Complex64::new(re, im);
        let spec = WeightSpec::PerturbedFree { beta: 0.6, amplitude: 0.3, seed };
        let op = JacobiOperator::for_indices(&spec, 20, &[l]).unwrap();
        let w = resolvent_window(&op, &SpectralPoint::new(l), 1..=20, 1..=20).unwrap();
        for j in 1..=20 {
            prop_assert!(w.get(j, j).im > 0.0);
        }
        prop_assert!(w.max_column_norm() <= 1.0 / im * (1.0 + 1e-10));
    }

    #[test]
    fn finite_symbol_product_identity_is_exact(a in symbol(4), b in symbol(4), size in 1usize..20) {
        let r = toeplitz::product_identity_check(&a, &b, size);
        prop_assert!(r.residual <= 1e-12, "{:?}", r);
    }

    #[test]
    fn reflection_is_an_involution(a in symbol(6)) {
        prop_assert_eq!(a.reflected().reflected(), a);
    }

    #[test]
    fn limiting_variance_is_nonnegative_and_quadratic(
        eta in prop::collection::vec(upper_half_plane(), 1..5),
        seed in prop::collection::vec(-1.0f64..1.0, 5),
        s in -3.0f64..3.0,
    ) {
        let c = &seed[..eta.len()];
        let v = sigma_poles_closed(&eta, c).unwrap();
        prop_assert!(v >= -1e-12 * (1.0 + v.abs()));
        let scaled: Vec<f64> = c.iter().map(|x| s * x).collect();
        let vs = sigma_poles_closed(&eta, &scaled).unwrap();
        prop_assert!((vs - s * s * v).abs() <= 1e-10 * (1.0 + vs.abs()));
    }

    #[test]
    fn higher_k_statistics_are_shift_invariant(
        values in prop::collection::vec(-3.0f64..3.0, 10..60),
        shift in -10.0f64..10.0,
    ) {
        let frame = MesoscopicFrame::new(0.0, 0.5, 1).unwrap();
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let a = empirical_cumulants(&batch_from(&values), &Identity, &frame, 4).unwrap();
        let b = empirical_cumulants(&batch_from(&shifted), &Identity, &frame, 4).unwrap();
        prop_assert!((b.values[0] - a.values[0] - shift).abs() <= 1e-10);
        for m in 1..4 {
            prop_assert!((a.values[m] - b.values[m]).abs() <= 1e-8 * (1.0 + a.values[m].abs()));
        }
    }

    #[test]
    fn decay_fit_recovers_the_exponent(beta in 0.2f64..3.0, c in 0.1f64..10.0) {
        let devs: Vec<f64> = (1..=400).map(|k| c * (k as f64).powf(-beta)).collect();
        match fit_tail_decay(&devs).unwrap() {
            DecayFit::PowerLaw { beta: b, constant } => {
                prop_assert!((b - beta).abs() <= 1e-9 && (constant - c).abs() <= 1e-8 * c);
            }
            DecayFit::ExactMatch => prop_assert!(false, "unexpected exact match"),
        }
    }

    #[test]
    fn gauss_rules_integrate_polynomials_exactly(m in 1usize..20, deg_frac in 0.0f64..1.0) {
        let deg = ((2 * m - 1) as f64 * deg_frac) as i32;
        let rule = QuadratureRule::gauss_jacobi(0.0, 0.0, m).unwrap();
        let got = rule.integrate(|x| x.powi(deg));
        let exact = if deg % 2 == 0 { 1.0 / (deg as f64 + 1.0) } else { 0.0 };
        prop_assert!((got - exact).abs() <= 1e-13, "m {} deg {} got {}", m, deg, got);
    }
}
