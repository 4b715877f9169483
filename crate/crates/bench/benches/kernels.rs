use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mesofluct::cumulants::operator_dimension;
use mesofluct::toeplitz::ExponentialFactors;
use mesofluct::{
    cd_kernel, compute_cumulants, generate_recurrence, pole_symbol, resolvent_window, sample_dpp, sigma_quadrature,
    JacobiOperator, MesoscopicFrame, PoleCombination, QuadratureGrid, RecurrenceCoefficients, SpectralPoint, WeightSpec,
};
use num_complex::Complex64;
use std::hint::black_box;

fn recurrence(c: &mut Criterion) {
    let spec = WeightSpec::ModifiedJacobi { gamma1: 0.5, gamma2: -0.3, h: vec![2.0, 0.5] };
    let mut g = c.benchmark_group("generate_recurrence");
    for n in [100usize, 400] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| generate_recurrence(black_box(&spec), n).unwrap()));
    }
    g.finish();
}

fn resolvent(c: &mut Criterion) {
    let l = Complex64::new(0.3, 0.05);
    let op = JacobiOperator::for_indices(&WeightSpec::free(), 200, &[l]).unwrap();
    c.bench_function("resolvent_window_200x200", |b| {
        b.iter(|| resolvent_window(black_box(&op), &SpectralPoint::new(l), 1..=200, 1..=200).unwrap())
    });
}

fn cumulants(c: &mut Criterion) {
    let f = PoleCombination::single();
    let mut g = c.benchmark_group("compute_cumulants");
    g.sample_size(10);
    for n in [250usize, 1000] {
        let frame = MesoscopicFrame::new(0.0, 0.5, n).unwrap();
        let op = JacobiOperator::free(operator_dimension(&frame, &f, (1.0, 0.0), 1.0).unwrap());
        let tf = f.clone().into();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| compute_cumulants(black_box(&op), &frame, &tf, &[1, 2, 3, 4]).unwrap())
        });
    }
    g.finish();
}

fn toeplitz(c: &mut Criterion) {
    let phi = pole_symbol(0.0, &[Complex64::new(0.0, 1.0)], &[1.0], 100, 0.5).unwrap();
    let mut g = c.benchmark_group("toeplitz");
    g.sample_size(10);
    g.bench_function("exponential_factors_100", |b| b.iter(|| ExponentialFactors::new(black_box(&phi), 0.1, 100).ehrhardt()));
    g.finish();
}

fn sampler(c: &mut Criterion) {
    let n = 100;
    let coeffs = RecurrenceCoefficients::free(20 * n);
    let grid = QuadratureGrid::gauss(&coeffs, 20 * n).unwrap();
    let kernel = cd_kernel(&coeffs, n, &grid).unwrap();
    let mut g = c.benchmark_group("sampler");
    g.sample_size(10);
    g.bench_function("cd_kernel_100", |b| b.iter(|| cd_kernel(black_box(&coeffs), n, &grid).unwrap()));
    g.bench_function("sample_dpp_100x64", |b| b.iter(|| sample_dpp(black_box(&kernel), 64, 1).unwrap()));
    g.finish();
}

fn variance(c: &mut Criterion) {
    let f = PoleCombination::new(vec![1.0, -0.5], vec![Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.5)]).unwrap().into();
    c.bench_function("sigma_quadrature_two_poles", |b| b.iter(|| sigma_quadrature(black_box(&f)).unwrap()));
}

criterion_group!(benches, recurrence, resolvent, cumulants, toeplitz, sampler, variance);
criterion_main!(benches);
