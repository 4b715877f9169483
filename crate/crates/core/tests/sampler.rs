use mesofluct::cumulants::operator_dimension;
use mesofluct::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn free_kernel(n: usize, m: usize) -> ProjectionKernel {
    let coeffs = RecurrenceCoefficients::free(m);
    cd_kernel(&coeffs, n, &QuadratureGrid::gauss(&coeffs, m).unwrap()).unwrap()
}

#[test]
fn rank_one_process_samples_the_measure() {
    let kernel = free_kernel(1, 30);
    let count = 20000;
    let batch = sample_dpp(&kernel, count, 17).unwrap();
    let mut observed = vec![0usize; 30];
    for c in &batch.indices {
        observed[c[0]] += 1;
    }
    let stat: f64 = kernel
        .grid()
        .weights
        .iter()
        .zip(&observed)
        .map(|(w, &o)| {
            let e = w * count as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let p = 1.0 - ChiSquared::new(29.0).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square {stat}, p = {p}");
}

#[test]
fn free_kernel_spectrum_is_zero_one() {
    let k = free_kernel(50, 200).matrix();
    let mut ev: Vec<f64> = k.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    assert!(ev[..50].iter().all(|v| (v - 1.0).abs() <= 1e-7));
    assert!(ev[50..].iter().all(|v| v.abs() <= 1e-7));
}

#[test]
fn legendre_grid_is_orthonormal() {
    let spec = WeightSpec::legendre();
    let coeffs = generate_recurrence(&spec, 40).unwrap();
    let grid = QuadratureGrid::for_weight(&spec, 400).unwrap();
    let k = cd_kernel(&coeffs, 40, &grid).unwrap();
    assert!(k.orthonormality_residual() <= 1e-8);
    assert!((grid.mass() - 1.0).abs() < 1e-13);
}

#[test]
fn empirical_mean_matches_the_kernel_trace() {
    let n = 100;
    let kernel = free_kernel(n, 20 * n);
    let frame = MesoscopicFrame::new(0.2, 0.4, n).unwrap();
    let f = PoleCombination::single();
    let batch = sample_dpp(&kernel, 2000, 3).unwrap();
    let emp = empirical_cumulants(&batch, &f, &frame, 2).unwrap();
    let (mean, se) = emp.value(1).unwrap();
    let exact = kernel.mean_linear_statistic(&f, &frame);
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} vs {exact} (se {se})");
    let (c2, se2) = emp.value(2).unwrap();
    let var = kernel.variance_linear_statistic(&f, &frame);
    assert!((c2 - var / 2.0).abs() <= 3.0 * se2);
}

#[test]
fn empirical_variance_matches_the_operator_trace() {
    let n = 200;
    let kernel = free_kernel(n, 20 * n);
    let frame = MesoscopicFrame::new(0.0, 0.4, n).unwrap();
    let f = PoleCombination::single();
    let dim = operator_dimension(&frame, &f, (1.0, 0.0), 1.0).unwrap();
    let exact = compute_cumulants(&JacobiOperator::free(dim), &frame, &f.clone().into(), &[2]).unwrap().values[0];
    assert!((kernel.variance_linear_statistic(&f, &frame) / 2.0 - exact).abs() <= 1e-10);
}

#[test]
fn third_cumulant_is_consistent_with_zero() {
    let n = 60;
    let kernel = free_kernel(n, 20 * n);
    let frame = MesoscopicFrame::new(0.0, 0.4, n).unwrap();
    let batch = sample_dpp(&kernel, 3000, 23).unwrap();
    let (c3, se) = empirical_cumulants(&batch, &PoleCombination::single(), &frame, 3).unwrap().value(3).unwrap();
    assert!(c3.abs() <= 3.0 * se, "{c3} (se {se})");
}

#[test]
fn batches_do_not_depend_on_the_thread_count() {
    let kernel = free_kernel(10, 100);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| sample_dpp(&kernel, 40, 5).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn mismatched_frame_is_rejected() {
    let kernel = free_kernel(5, 50);
    let batch = sample_dpp(&kernel, 10, 1).unwrap();
    let frame = MesoscopicFrame::new(0.0, 0.5, 6).unwrap();
    let e = empirical_cumulants(&batch, &PoleCombination::single(), &frame, 2).unwrap_err();
    assert!(e.is_validation());
}
