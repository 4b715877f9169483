//! Limiting variance, weighted Lipschitz norm and pole-combination fitting.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, CompensatedSum};
use crate::quadrature::QuadratureRule;
use crate::testfn::{PoleCombination, RealFunction, SampledC1, TestFunction};

/// Smoothing width of the sampled-function pipeline.
pub const DEFAULT_DELTA: f64 = 0.1;
/// Below this separation the difference quotient is replaced by `f'`.
pub const DIAGONAL_BAND: f64 = 1e-4;
pub const SIGMA_TOL: f64 = 1e-8;
const SIGMA_TARGET: f64 = 1e-11;
const PANEL_ORDER: usize = 16;
const MAX_PANELS: usize = 1024;
const MAX_CONDITION: f64 = 1e12;
/// Width of the zero padding on each side of the support in the fit.
const FIT_EXTERIOR: f64 = 8.0;
const FIT_EXTERIOR_STEP: f64 = 0.02;
/// Relative size of the end values below which a sample counts as compactly supported.
const COMPACT_EDGE: f64 = 1e-12;

fn gauss_legendre(order: usize) -> QuadratureRule {
    QuadratureRule::gauss_jacobi(0.0, 0.0, order).expect("Gauss-Legendre nodes")
}

/// Composite Gauss–Legendre nodes on the given breakpoints.
fn composite(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let base = gauss_legendre(order);
    let mut xs = Vec::with_capacity((breaks.len() - 1) * order);
    let mut ws = Vec::with_capacity(xs.capacity());
    for w in breaks.windows(2) {
        let r = base.mapped_legendre(w[0], w[1]);
        xs.extend_from_slice(&r.nodes);
        ws.extend_from_slice(&r.weights);
    }
    (xs, ws)
}

fn uniform_breaks(lo: f64, hi: f64, panels: usize) -> Vec<f64> {
    (0..=panels).map(|i| lo + (hi - lo) * i as f64 / panels as f64).collect()
}

fn difference_quotient(f: &dyn RealFunction, x: f64, fx: f64, y: f64, fy: f64) -> f64 {
    if (x - y).abs() < DIAGONAL_BAND {
        f.derivative(0.5 * (x + y))
    } else {
        (fx - fy) / (x - y)
    }
}

/// `sum_{i,j} w_i w_j q_f(x_i, x_j) q_g(x_i, x_j)` over a symmetric node set.
fn pair_sum(f: &dyn RealFunction, g: &dyn RealFunction, xs: &[f64], ws: &[f64]) -> f64 {
    let fv: Vec<f64> = xs.iter().map(|&x| f.value(x)).collect();
    let gv: Vec<f64> = xs.iter().map(|&x| g.value(x)).collect();
    let mut acc = CompensatedSum::new();
    for i in 0..xs.len() {
        let mut row = 0.0;
        for j in 0..i {
            let qf = difference_quotient(f, xs[i], fv[i], xs[j], fv[j]);
            let qg = difference_quotient(g, xs[i], gv[i], xs[j], gv[j]);
            row += ws[j] * qf * qg;
        }
        acc.add(2.0 * ws[i] * row);
        acc.add(ws[i] * ws[i] * f.derivative(xs[i]) * g.derivative(xs[i]));
    }
    acc.value()
}

/// `(1 / 4 pi^2) iint q_f q_g dx dy` over the whole plane with `x = tan(theta)`.
fn line_pairing(f: &dyn RealFunction, g: &dyn RealFunction) -> Result<f64> {
    let half = std::f64::consts::FRAC_PI_2;
    let norm = 1.0 / (4.0 * std::f64::consts::PI.powi(2));
    let mut panels = 8;
    let mut prev: Option<f64> = None;
    loop {
        let (th, wt) = composite(&uniform_breaks(-half, half, panels), PANEL_ORDER);
        let xs: Vec<f64> = th.iter().map(|t| t.tan()).collect();
        let ws: Vec<f64> = th.iter().zip(&wt).map(|(t, w)| w / t.cos().powi(2)).collect();
        let v = norm * pair_sum(f, g, &xs, &ws);
        if let Some(p) = prev {
            let change = (v - p).abs();
            if change <= SIGMA_TARGET * v.abs().max(1e-3) {
                return Ok(v);
            }
            if panels >= MAX_PANELS {
                if change <= SIGMA_TOL {
                    return Ok(v);
                }
                return Err(Error::QuadratureNotConverged { change, tol: SIGMA_TOL });
            }
        }
        prev = Some(v);
        panels *= 2;
    }
}

/// Integration domain `[lo, hi]` and Hermite cell breakpoints of a sampled function.
fn sampled_domain(s: &SampledC1) -> (f64, f64, Vec<f64>) {
    let lo = s.support().0.max(s.grid()[0]);
    let hi = s.support().1.min(*s.grid().last().unwrap());
    let mut br: Vec<f64> = std::iter::once(lo)
        .chain(s.grid().iter().copied().filter(|&x| x > lo && x < hi))
        .chain(std::iter::once(hi))
        .collect();
    br.dedup();
    (lo, hi, br)
}

fn sampled_sigma(s: &SampledC1) -> Result<f64> {
    let (lo, hi, cells) = sampled_domain(s);
    let norm = 1.0 / (4.0 * std::f64::consts::PI.powi(2));
    let mut split = 1;
    let mut prev: Option<f64> = None;
    loop {
        let breaks: Vec<f64> = cells
            .windows(2)
            .flat_map(|w| (0..split).map(move |k| w[0] + (w[1] - w[0]) * k as f64 / split as f64))
            .chain(std::iter::once(hi))
            .collect();
        let (xs, ws) = composite(&breaks, 8);
        let inner = pair_sum(s, s, &xs, &ws);
        // y outside the support: int dy / (x - y)^2 = 1/(x - lo) + 1/(hi - x)
        let outer = compensated_sum(
            xs.iter().zip(&ws).map(|(&x, &w)| w * s.value(x).powi(2) * (1.0 / (x - lo) + 1.0 / (hi - x))),
        );
        let v = norm * (inner + 2.0 * outer);
        if let Some(p) = prev {
            let change = (v - p).abs();
            if change <= SIGMA_TARGET * v.abs().max(1e-3) {
                return Ok(v);
            }
            if split >= 16 || xs.len() > 6000 {
                if change <= SIGMA_TOL {
                    return Ok(v);
                }
                return Err(Error::QuadratureNotConverged { change, tol: SIGMA_TOL });
            }
        }
        prev = Some(v);
        split *= 2;
    }
}

/// `sigma_f^2 = (1 / 4 pi^2) iint ((f(x) - f(y)) / (x - y))^2 dx dy`.
pub fn sigma_quadrature(f: &TestFunction) -> Result<f64> {
    match f {
        TestFunction::PoleCombination(p) => line_pairing(p, p),
        TestFunction::SampledC1(s) => sampled_sigma(s),
    }
}

/// `sigma^2` assembled from the pairwise integrals of single poles.
pub fn sigma_bilinear(f: &PoleCombination) -> Result<f64> {
    let singles: Vec<PoleCombination> =
        f.poles().iter().map(|&e| PoleCombination::new(vec![1.0], vec![e])).collect::<Result<_>>()?;
    let c = f.coefficients();
    let mut acc = CompensatedSum::new();
    for i in 0..singles.len() {
        for j in 0..=i {
            let term = line_pairing(&singles[i], &singles[j])?;
            let mult = if i == j { 1.0 } else { 2.0 };
            acc.add(mult * c[i] * c[j] * term);
        }
    }
    Ok(acc.value())
}

/// Matrix `-1/2 Re (eta_i - conj eta_j)^-2` of the closed-form quadratic form.
pub fn sigma_form_matrix(eta: &[Complex64]) -> DMatrix<f64> {
    let n = eta.len();
    DMatrix::from_fn(n, n, |i, j| {
        let d = eta[i] - eta[j].conj();
        -0.5 * (d * d).inv().re
    })
}

/// `sigma^2 = -1/2 sum_{i,j} c_i c_j Re (eta_i - conj eta_j)^-2`.
pub fn sigma_poles_closed(eta: &[Complex64], c: &[f64]) -> Result<f64> {
    if eta.len() != c.len() {
        return Err(Error::invalid("f.c", "need one coefficient per pole"));
    }
    if eta.iter().any(|e| !(e.im > 0.0)) {
        return Err(Error::invalid("f.eta", "poles must lie in the upper half-plane"));
    }
    let m = sigma_form_matrix(eta);
    let cv = DVector::from_column_slice(c);
    Ok((cv.transpose() * m * &cv)[(0, 0)])
}

/// Grid lower bound of `sup sqrt(1+x^2) sqrt(1+y^2) |(f(x) - f(y)) / (x - y)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedLipschitzEstimate {
    pub value: f64,
    pub grid_resolution: f64,
    /// Always set: a supremum over the plane is only bounded below by samples.
    pub lower_bound_flag: bool,
}

/// Sup over grid pairs, the diagonal terms `(1 + x^2) |f'(x)|`, and the
/// `y -> infinity` limits `sqrt(1 + x^2) |f(x)|`.
pub fn lw_norm_estimate(f: &dyn RealFunction, grid: &[f64]) -> WeightedLipschitzEstimate {
    let vals: Vec<f64> = grid.iter().map(|&x| f.value(x)).collect();
    let wts: Vec<f64> = grid.iter().map(|&x| (1.0 + x * x).sqrt()).collect();
    let mut best = 0.0f64;
    for i in 0..grid.len() {
        best = best.max(wts[i] * vals[i].abs());
        best = best.max(wts[i] * wts[i] * f.derivative(grid[i]).abs());
        for j in 0..i {
            if grid[i] != grid[j] {
                best = best.max(wts[i] * wts[j] * ((vals[i] - vals[j]) / (grid[i] - grid[j])).abs());
            }
        }
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let res = sorted.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    WeightedLipschitzEstimate { value: best, grid_resolution: res, lower_bound_flag: true }
}

/// Poisson kernel integral `(1/pi) int f(s) delta / ((s - x)^2 + delta^2) ds`
/// and its `x`-derivative, by composite quadrature on sub-cells of width
/// at most `delta / 4`.
fn poisson_at(nodes: &[f64], weights: &[f64], fvals: &[f64], x: f64, delta: f64) -> (f64, f64) {
    let mut v = CompensatedSum::new();
    let mut d = CompensatedSum::new();
    for ((&t, &w), &ft) in nodes.iter().zip(weights).zip(fvals) {
        let u = t - x;
        let den = u * u + delta * delta;
        v.add(w * ft * delta / den);
        d.add(w * ft * 2.0 * delta * u / (den * den));
    }
    (v.value() / std::f64::consts::PI, d.value() / std::f64::consts::PI)
}

/// Poisson smoothing at width `delta`, `0 < delta < 1`.
///
/// Pole combinations are smoothed exactly by shifting poles up by `i delta`.
/// Sampled functions are smoothed on their own grid; the result is treated
/// as zero outside that grid.
pub fn poisson_smooth(f: &TestFunction, delta: f64) -> Result<TestFunction> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("{delta} must lie in (0, 1)")));
    }
    match f {
        TestFunction::PoleCombination(p) => Ok(p.shifted(delta).into()),
        TestFunction::SampledC1(s) => {
            let (_, hi, cells) = sampled_domain(s);
            let breaks: Vec<f64> = cells
                .windows(2)
                .flat_map(|w| {
                    let k = ((w[1] - w[0]) / (0.25 * delta)).ceil().max(1.0) as usize;
                    (0..k).map(move |i| w[0] + (w[1] - w[0]) * i as f64 / k as f64)
                })
                .chain(std::iter::once(hi))
                .collect();
            let (nodes, weights) = composite(&breaks, 8);
            let fvals: Vec<f64> = nodes.iter().map(|&t| s.value(t)).collect();
            let grid = s.grid().to_vec();
            let (mut vals, mut ders) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
            for &x in &grid {
                let (v, d) = poisson_at(&nodes, &weights, &fvals, x, delta);
                vals.push(v);
                ders.push(d);
            }
            let support = (grid[0], *grid.last().unwrap());
            Ok(SampledC1::new(grid, vals, ders, support)?.into())
        }
    }
}

/// `psi(s) = 1/(1 + s^2) - 1/(4 + s^2) = Im 1/(s - i) - (1/2) Im 1/(s - 2i)`.
pub fn psi(s: f64) -> f64 {
    1.0 / (1.0 + s * s) - 1.0 / (4.0 + s * s)
}

/// Result of [`fit_resolvent_combination`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventFit {
    /// Smoothed combination `phi_delta`, poles at `tau_j + i(1 + delta)` and `tau_j + i(2 + delta)`.
    pub poles: PoleCombination,
    /// Least-squares fit `phi = sum c'_j psi(. - tau_j)` before smoothing.
    pub unsmoothed: PoleCombination,
    pub translates: Vec<f64>,
    pub weights: Vec<f64>,
    /// Trapezoid value of `int |f - phi| (1 + s^2 / delta^2) ds` on the fitting nodes.
    pub residual: f64,
    pub condition: f64,
}

/// Sample grid inside `[lo, hi]`. When `f` vanishes at both ends it is
/// compactly supported, and zeros on `FIT_EXTERIOR` either side are added so
/// the fit cannot oscillate off the support.
fn fitting_nodes(f: &SampledC1, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let inner: Vec<f64> = f.grid().iter().copied().filter(|&x| x >= lo && x <= hi).collect();
    let edge = f.value(lo).abs().max(f.value(hi).abs());
    if edge > COMPACT_EDGE * f.sup_norm() {
        let ys = inner.iter().map(|&x| f.value(x)).collect();
        return (inner, ys);
    }
    let step = ((hi - lo) / inner.len().max(2) as f64).max(FIT_EXTERIOR_STEP);
    let k = (FIT_EXTERIOR / step).ceil() as usize;
    let left = (1..=k).rev().map(|i| lo - step * i as f64);
    let right = (1..=k).map(|i| hi + step * i as f64);
    let xs: Vec<f64> = left.chain(inner.iter().copied()).chain(right).collect();
    let ys = xs.iter().map(|&x| f.value(x)).collect();
    (xs, ys)
}

/// Least-squares fit of `f` by `N` translates of `psi`, spread uniformly over
/// the support widened by one on each side, followed by Poisson smoothing.
pub fn fit_resolvent_combination(f: &SampledC1, n: usize, delta: f64) -> Result<ResolventFit> {
    if n == 0 {
        return Err(Error::invalid("fit.n", "need at least one translate"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("{delta} must lie in (0, 1)")));
    }
    let (lo, hi, _) = sampled_domain(f);
    let (a, b) = (lo - 1.0, hi + 1.0);
    let tau: Vec<f64> = if n == 1 {
        vec![0.5 * (a + b)]
    } else {
        (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect()
    };
    let (xs, ys) = fitting_nodes(f, lo, hi);
    let m = xs.len();
    let trap: Vec<f64> = (0..m)
        .map(|k| {
            let left = if k > 0 { xs[k] - xs[k - 1] } else { 0.0 };
            let right = if k + 1 < m { xs[k + 1] - xs[k] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    let design = DMatrix::from_fn(m, n, |k, j| psi(xs[k] - tau[j]));
    let weighted = DMatrix::from_fn(m, n, |k, j| design[(k, j)] * trap[k]);
    let gram = design.tr_mul(&weighted);
    let eig = gram.clone().symmetric_eigenvalues();
    let (emin, emax) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    let condition = if emin > 0.0 { emax / emin } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::IllConditioned(condition));
    }
    let rhs = weighted.tr_mul(&DVector::from_column_slice(&ys));
    let coef = gram.cholesky().ok_or(Error::IllConditioned(condition))?.solve(&rhs);

    let mut c = Vec::with_capacity(2 * n);
    let mut eta0 = Vec::with_capacity(2 * n);
    for j in 0..n {
        c.push(coef[j]);
        eta0.push(Complex64::new(tau[j], 1.0));
        c.push(-0.5 * coef[j]);
        eta0.push(Complex64::new(tau[j], 2.0));
    }
    let unsmoothed = PoleCombination::new(c, eta0)?;
    let fitted = &design * &coef;
    let residual = compensated_sum((0..m).map(|k| trap[k] * (ys[k] - fitted[k]).abs() * (1.0 + xs[k] * xs[k] / (delta * delta))));
    Ok(ResolventFit {
        poles: unsmoothed.shifted(delta),
        unsmoothed,
        translates: tau,
        weights: coef.iter().copied().collect(),
        residual,
        condition,
    })
}

/// The largest well-conditioned fit with at most `max_n` translates.
pub fn fit_best(f: &SampledC1, max_n: usize, delta: f64) -> Result<ResolventFit> {
    let mut last = Error::invalid("fit.n", "need at least one translate");
    for n in (1..=max_n).rev() {
        match fit_resolvent_combination(f, n, delta) {
            Ok(fit) => return Ok(fit),
            Err(e @ Error::IllConditioned(_)) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pole_sigma() {
        let f: TestFunction = PoleCombination::single().into();
        let q = sigma_quadrature(&f).unwrap();
        assert!((q - 0.125).abs() < 1e-9, "{q}");
        let c = sigma_poles_closed(&[Complex64::new(0.0, 1.0)], &[1.0]).unwrap();
        assert!((c - 0.125).abs() < 1e-15);
    }

    #[test]
    fn zero_function_has_zero_sigma() {
        let f = PoleCombination::new(vec![0.0], vec![Complex64::new(0.0, 1.0)]).unwrap();
        assert_eq!(sigma_quadrature(&f.into()).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_is_quadratic() {
        let eta = [Complex64::new(0.3, 0.7), Complex64::new(-1.0, 1.5)];
        let c = [0.4, -1.1];
        let v = sigma_poles_closed(&eta, &c).unwrap();
        let v3 = sigma_poles_closed(&eta, &[1.2, -3.3]).unwrap();
        assert!((v3 - 9.0 * v).abs() < 1e-14);
    }

    #[test]
    fn lw_norm_of_single_pole_is_one() {
        let f = PoleCombination::single();
        let grid = SampledC1::uniform_grid(-10.0, 10.0, 2001);
        let est = lw_norm_estimate(&f, &grid);
        assert!(est.lower_bound_flag);
        assert!(est.value <= 1.0 + 1e-12 && est.value > 0.999, "{}", est.value);
    }

    #[test]
    fn smoothing_poles_shifts_them() {
        let f: TestFunction = PoleCombination::single().into();
        let g = poisson_smooth(&f, 0.3).unwrap();
        assert_eq!(g.as_poles().unwrap().poles()[0], Complex64::new(0.0, 1.3));
        assert!(poisson_smooth(&f, 1.0).is_err());
    }

    #[test]
    fn exact_translate_is_fitted_exactly() {
        let tau0 = 0.4;
        let grid = SampledC1::uniform_grid(tau0 - 3.0, tau0 + 3.0, 241);
        let f = SampledC1::new(
            grid.clone(),
            grid.iter().map(|&x| psi(x - tau0)).collect(),
            vec![0.0; grid.len()],
            (tau0 - 3.0, tau0 + 3.0),
        )
        .unwrap();
        let fit = fit_resolvent_combination(&f, 1, 0.1).unwrap();
        assert!((fit.translates[0] - tau0).abs() < 1e-14);
        assert!(fit.residual < 1e-10, "{}", fit.residual);
    }
}
