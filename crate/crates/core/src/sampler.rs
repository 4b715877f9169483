//! Monte Carlo sampling of the ensemble as a projection determinantal
//! process on a quadrature grid, and empirical cumulants.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cumulants::MesoscopicFrame;
use crate::error::{Error, Result};
use crate::linalg::compensated_sum;
use crate::measures::{generate_recurrence, horner, RecurrenceCoefficients, WeightSpec};
use crate::quadrature::QuadratureRule;
use crate::testfn::RealFunction;

/// Largest tolerated `max |Psi^T Psi - I|`.
pub const ORTHONORMALITY_TOL: f64 = 1e-6;
/// Grid nodes per ensemble point in [`QuadratureGrid::for_weight`].
pub const NODES_PER_POINT: usize = 20;
const PIVOT_FLOOR: f64 = 1e-10;

/// Discrete carrier of the orthogonality measure.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub measure: String,
}

impl QuadratureGrid {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, measure: impl Into<String>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::invalid("grid", "nodes and weights must be non-empty and of equal length"));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("grid.nodes", "must be finite"));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("grid.weights", "must be positive"));
        }
        Ok(Self { nodes, weights, measure: measure.into() })
    }

    pub fn from_rule(rule: QuadratureRule, measure: impl Into<String>) -> Result<Self> {
        Self::new(rule.nodes, rule.weights, measure)
    }

    /// `m`-point Gauss rule of the measure with the given recurrence.
    pub fn gauss(coeffs: &RecurrenceCoefficients, m: usize) -> Result<Self> {
        if coeffs.len() < m {
            return Err(Error::InsufficientCoefficients { needed: m, available: coeffs.len() });
        }
        let rule = QuadratureRule::gauss_from_recurrence(coeffs.off_diagonal(), coeffs.diagonal(), m)?;
        Self::from_rule(rule, "gauss(recurrence)")
    }

    /// Gauss rule of the base weight with `m` nodes, carrying the
    /// orthogonality measure of `spec` normalized to unit mass.
    pub fn for_weight(spec: &WeightSpec, m: usize) -> Result<Self> {
        spec.validate()?;
        match spec {
            WeightSpec::ModifiedJacobi { gamma1, gamma2, h } => {
                let mut rule = QuadratureRule::gauss_jacobi(*gamma1, *gamma2, m)?;
                for (w, x) in rule.weights.iter_mut().zip(&rule.nodes) {
                    *w *= horner(h, *x);
                }
                let mass = compensated_sum(rule.weights.iter().copied());
                rule.weights.iter_mut().for_each(|w| *w /= mass);
                Self::from_rule(rule, format!("jacobi({gamma1},{gamma2})"))
            }
            _ => {
                let coeffs = generate_recurrence(spec, m)?;
                let mut g = Self::gauss(&coeffs, m)?;
                g.measure = format!("{spec:?}");
                Ok(g)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }
}

/// Rank-`n` projection `K_ij = sqrt(w_i w_j) K_n(x_i, x_j)`, stored as its
/// factor `Psi_ij = sqrt(w_i) p_{j-1}(x_i)` so that `K = Psi Psi^T`.
#[derive(Debug, Clone)]
pub struct ProjectionKernel {
    grid: QuadratureGrid,
    psi: DMatrix<f64>,
    orthonormality_residual: f64,
}

impl ProjectionKernel {
    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.psi.ncols()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn orthonormality_residual(&self) -> f64 {
        self.orthonormality_residual
    }

    /// Dense `M x M` kernel.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.psi * self.psi.transpose()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.psi.row(i).dot(&self.psi.row(j))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.psi.row_iter().map(|r| r.norm_squared()).collect()
    }

    pub fn trace(&self) -> f64 {
        compensated_sum(self.diagonal())
    }

    fn local_values(&self, f: &dyn RealFunction, frame: &MesoscopicFrame) -> Vec<f64> {
        self.grid.nodes.iter().map(|&x| f.value(frame.local(x))).collect()
    }

    /// `Tr f K`, the mean of the discretized linear statistic.
    pub fn mean_linear_statistic(&self, f: &dyn RealFunction, frame: &MesoscopicFrame) -> f64 {
        let fv = self.local_values(f, frame);
        compensated_sum(fv.iter().zip(self.diagonal()).map(|(a, d)| a * d))
    }

    /// `Tr f K - Tr f K f K`, the variance of the discretized linear statistic.
    pub fn variance_linear_statistic(&self, f: &dyn RealFunction, frame: &MesoscopicFrame) -> f64 {
        let fv = self.local_values(f, frame);
        let mut scaled = self.psi.clone();
        for (i, v) in fv.iter().enumerate() {
            scaled.row_mut(i).scale_mut(*v);
        }
        let m = self.psi.tr_mul(&scaled);
        let quad = compensated_sum(fv.iter().zip(self.diagonal()).map(|(a, d)| a * a * d));
        quad - m.norm_squared()
    }
}

/// Christoffel–Darboux projection kernel of rank `n` on `grid`.
pub fn cd_kernel(coeffs: &RecurrenceCoefficients, n: usize, grid: &QuadratureGrid) -> Result<ProjectionKernel> {
    if n == 0 {
        return Err(Error::invalid("n", "rank must be at least 1"));
    }
    if n > coeffs.len() {
        return Err(Error::InsufficientCoefficients { needed: n, available: coeffs.len() });
    }
    if n > grid.len() {
        return Err(Error::invalid("grid", format!("{} nodes cannot carry rank {n}", grid.len())));
    }
    let mut psi = DMatrix::<f64>::zeros(grid.len(), n);
    let mut p = vec![0.0; n];
    for (i, (&x, &w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
        coeffs.eval_orthonormal(x, &mut p);
        let sw = w.sqrt();
        for (j, pj) in p.iter().enumerate() {
            psi[(i, j)] = sw * pj;
        }
    }
    let gram = psi.tr_mul(&psi) - DMatrix::<f64>::identity(n, n);
    let residual = gram.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(residual <= ORTHONORMALITY_TOL) {
        return Err(Error::GridTooCoarse(residual));
    }
    Ok(ProjectionKernel { grid: grid.clone(), psi, orthonormality_residual: residual })
}

/// Independent configurations of the determinantal process.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// Grid indices of each configuration, increasing.
    pub indices: Vec<Vec<usize>>,
    /// Node positions of each configuration, increasing.
    pub samples: Vec<Vec<f64>>,
    pub seed: u64,
    pub count: usize,
    pub n: usize,
}

/// Per-configuration generator: stream `index` of the ChaCha8 seed `seed`.
pub fn configuration_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `count` configurations by sequential conditional sampling.
pub fn sample_dpp(kernel: &ProjectionKernel, count: usize, seed: u64) -> Result<SampleBatch> {
    let base = kernel.diagonal();
    let indices = (0..count)
        .into_par_iter()
        .map(|s| sample_one(kernel, &base, &mut configuration_rng(seed, s as u64)))
        .collect::<Result<Vec<_>>>()?;
    let samples = indices.iter().map(|c| c.iter().map(|&i| kernel.grid.nodes[i]).collect()).collect();
    Ok(SampleBatch { indices, samples, seed, count, n: kernel.rank() })
}

fn sample_one(kernel: &ProjectionKernel, base: &[f64], rng: &mut impl Rng) -> Result<Vec<usize>> {
    let psi = &kernel.psi;
    let n = psi.ncols();
    let mut r = base.to_vec();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut chosen = Vec::with_capacity(n);
    let mut proj = DVector::<f64>::zeros(psi.nrows());
    for step in 0..n {
        let total: f64 = r.iter().sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = r.len() - 1;
        for (i, ri) in r.iter().enumerate() {
            acc += ri;
            if acc > u {
                pick = i;
                break;
            }
        }
        if !(r[pick] > PIVOT_FLOOR) {
            return Err(Error::RankDeficient { rank: step, n });
        }
        let mut v: DVector<f64> = psi.row(pick).transpose();
        for _ in 0..2 {
            for e in &basis {
                let c = e.dot(&v);
                v.axpy(-c, e, 1.0);
            }
        }
        let norm = v.norm();
        if !(norm > PIVOT_FLOOR.sqrt()) {
            return Err(Error::RankDeficient { rank: step, n });
        }
        v /= norm;
        proj.gemv(1.0, psi, &v, 0.0);
        for (ri, pj) in r.iter_mut().zip(proj.iter()) {
            *ri = (*ri - pj * pj).max(0.0);
        }
        r[pick] = 0.0;
        basis.push(v);
        chosen.push(pick);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// k-statistic estimates of `C_m = kappa_m / m!` with jackknife errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCumulants {
    pub frame: MesoscopicFrame,
    pub m_values: Vec<usize>,
    pub values: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub count: usize,
}

impl EmpiricalCumulants {
    pub fn value(&self, m: usize) -> Option<(f64, f64)> {
        self.m_values.iter().position(|&k| k == m).map(|i| (self.values[i], self.standard_errors[i]))
    }
}

/// Unbiased cumulant estimates `k_1..k_4` from power sums of centered data.
fn k_statistics(s: [f64; 5], max_m: usize) -> Vec<f64> {
    let n = s[0];
    let (s1, s2, s3, s4) = (s[1], s[2], s[3], s[4]);
    let mut k = vec![s1 / n];
    if max_m >= 2 {
        k.push((n * s2 - s1 * s1) / (n * (n - 1.0)));
    }
    if max_m >= 3 {
        k.push((2.0 * s1.powi(3) - 3.0 * n * s1 * s2 + n * n * s3) / (n * (n - 1.0) * (n - 2.0)));
    }
    if max_m >= 4 {
        let num = -6.0 * s1.powi(4) + 12.0 * n * s1 * s1 * s2 - 3.0 * n * (n - 1.0) * s2 * s2
            - 4.0 * n * (n + 1.0) * s1 * s3
            + n * n * (n + 1.0) * s4;
        k.push(num / (n * (n - 1.0) * (n - 2.0) * (n - 3.0)));
    }
    k
}

fn power_sums(xs: &[f64]) -> [f64; 5] {
    let mut s = [xs.len() as f64, 0.0, 0.0, 0.0, 0.0];
    for p in 1..5 {
        s[p] = compensated_sum(xs.iter().map(|x| x.powi(p as i32)));
    }
    s
}

/// Values of `X_f = sum_j f(n^alpha (x_j - x0))` over the batch.
pub fn linear_statistics(batch: &SampleBatch, f: &dyn RealFunction, frame: &MesoscopicFrame) -> Vec<f64> {
    batch.samples.iter().map(|c| compensated_sum(c.iter().map(|&x| f.value(frame.local(x))))).collect()
}

pub fn empirical_cumulants(
    batch: &SampleBatch,
    f: &dyn RealFunction,
    frame: &MesoscopicFrame,
    max_m: usize,
) -> Result<EmpiricalCumulants> {
    if !(1..=4).contains(&max_m) {
        return Err(Error::invalid("max_m", format!("k-statistics are available for orders 1..=4, got {max_m}")));
    }
    if batch.n != frame.n {
        return Err(Error::invalid("frame.n", format!("batch has {} points per configuration", batch.n)));
    }
    if batch.count < max_m + 2 {
        return Err(Error::invalid("count", format!("{} samples are too few for order {max_m}", batch.count)));
    }
    let xs = linear_statistics(batch, f, frame);
    let shift = compensated_sum(xs.iter().copied()) / xs.len() as f64;
    let centered: Vec<f64> = xs.iter().map(|x| x - shift).collect();
    let total = power_sums(&centered);
    let mut full = k_statistics(total, max_m);
    full[0] += shift;
    let count = centered.len();
    let replicates: Vec<Vec<f64>> = centered
        .iter()
        .map(|&x| {
            let mut s = total;
            s[0] -= 1.0;
            for (p, sp) in s.iter_mut().enumerate().skip(1) {
                *sp -= x.powi(p as i32);
            }
            k_statistics(s, max_m)
        })
        .collect();
    let mut factorial = 1.0;
    let mut values = Vec::with_capacity(max_m);
    let mut standard_errors = Vec::with_capacity(max_m);
    for m in 1..=max_m {
        factorial *= m as f64;
        let reps: Vec<f64> = replicates.iter().map(|r| r[m - 1]).collect();
        let mean = compensated_sum(reps.iter().copied()) / count as f64;
        let ss = compensated_sum(reps.iter().map(|r| (r - mean).powi(2)));
        values.push(full[m - 1] / factorial);
        standard_errors.push(((count as f64 - 1.0) / count as f64 * ss).sqrt() / factorial);
    }
    Ok(EmpiricalCumulants { frame: *frame, m_values: (1..=max_m).collect(), values, standard_errors, count })
}

/// Exact law of the discrete process: `P(S) = det(Psi_S)^2` for every
/// `n`-subset `S` of the grid.
pub fn exact_configuration_law(kernel: &ProjectionKernel) -> Vec<(Vec<usize>, f64)> {
    let n = kernel.rank();
    (0..kernel.grid.len())
        .combinations(n)
        .map(|s| {
            let sub = DMatrix::from_fn(n, n, |i, j| kernel.psi[(s[i], j)]);
            let d = sub.determinant();
            (s, d * d)
        })
        .collect()
}

/// Pearson statistic of observed configuration counts against the exact
/// law, with cells of expected count below 5 pooled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareSummary {
    pub statistic: f64,
    pub dof: usize,
    /// `(statistic - dof) / sqrt(2 dof)`, in standard errors.
    pub z: f64,
}

pub fn configuration_chi_square(batch: &SampleBatch, law: &[(Vec<usize>, f64)]) -> ChiSquareSummary {
    let counts = batch.indices.iter().counts();
    let total = batch.count as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (s, p) in law {
        let expected = total * p;
        let observed = counts.get(s).copied().unwrap_or(0) as f64;
        if expected < 5.0 {
            pooled_obs += observed;
            pooled_exp += expected;
        } else {
            stat += (observed - expected).powi(2) / expected;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    let dof = cells.saturating_sub(1).max(1);
    ChiSquareSummary { statistic: stat, dof, z: (stat - dof as f64) / (2.0 * dof as f64).sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::PoleCombination;

    fn free_kernel(n: usize, m: usize) -> ProjectionKernel {
        let coeffs = RecurrenceCoefficients::free(m);
        cd_kernel(&coeffs, n, &QuadratureGrid::gauss(&coeffs, m).unwrap()).unwrap()
    }

    #[test]
    fn kernel_is_a_projection() {
        let k = free_kernel(20, 120);
        assert!((k.trace() - 20.0).abs() < 1e-10);
        let m = k.matrix();
        let diff = &m * &m - &m;
        assert!(diff.amax() < 1e-7);
        assert!((&m - m.transpose()).amax() == 0.0);
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        let coeffs = RecurrenceCoefficients::free(40);
        let nodes: Vec<f64> = (0..12).map(|i| -2.0 + 4.0 * (i as f64 + 0.5) / 12.0).collect();
        let weights: Vec<f64> = nodes.iter().map(|x| (4.0 - x * x).sqrt() / 12.0).collect();
        let grid = QuadratureGrid::new(nodes, weights, "midpoint").unwrap();
        assert!(matches!(cd_kernel(&coeffs, 10, &grid), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn configurations_have_n_distinct_points_and_are_reproducible() {
        let k = free_kernel(8, 60);
        let a = sample_dpp(&k, 30, 7).unwrap();
        let b = sample_dpp(&k, 30, 7).unwrap();
        assert_eq!(a, b);
        for c in &a.indices {
            assert_eq!(c.len(), 8);
            assert!(c.windows(2).all(|w| w[0] < w[1]));
        }
        assert_ne!(a, sample_dpp(&k, 30, 8).unwrap());
    }

    #[test]
    fn zero_function_has_zero_cumulants() {
        let k = free_kernel(5, 40);
        let batch = sample_dpp(&k, 50, 1).unwrap();
        let frame = MesoscopicFrame::new(0.0, 0.4, 5).unwrap();
        let zero = PoleCombination::new(vec![0.0], vec![num_complex::Complex64::new(0.0, 1.0)]).unwrap();
        let e = empirical_cumulants(&batch, &zero, &frame, 4).unwrap();
        assert!(e.values.iter().chain(&e.standard_errors).all(|v| *v == 0.0));
    }

    #[test]
    fn k_statistics_of_a_small_sample() {
        // 1, 2, 3, 4, 10: mean 4, variance 12.5
        let xs = [1.0, 2.0, 3.0, 4.0, 10.0];
        let k = k_statistics(power_sums(&xs), 4);
        assert!((k[0] - 4.0).abs() < 1e-14);
        assert!((k[1] - 12.5).abs() < 1e-12);
        // third central sample moment sum is 180
        let k3 = 5.0 * 180.0 / (4.0 * 3.0);
        assert!((k[2] - k3).abs() < 1e-10);
    }

    #[test]
    fn exact_law_sums_to_one() {
        let k = free_kernel(3, 12);
        let total: f64 = exact_configuration_law(&k).iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
