//! Truncated Jacobi operators and their Green's functions.

use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::TridiagonalLu;
use crate::measures::{generate_recurrence, RecurrenceCoefficients, WeightSpec};

/// Smallest admissible `Im lambda`.
pub const MIN_IMAG: f64 = 1e-12;
/// Combes–Thomas tail tolerance used to size truncation buffers.
pub const BUFFER_TOL: f64 = 1e-13;
pub const DEFAULT_BUFFER_CAP: usize = 1_000_000;
const CUT_TOL: f64 = 1e-14;

/// A spectral parameter, optionally remembered in mesoscopic form
/// `lambda = x0 + eta / n^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub lambda: Complex64,
    pub shift: Option<MesoscopicShift>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MesoscopicShift {
    pub x0: f64,
    pub eta: Complex64,
    pub n: usize,
    pub alpha: f64,
}

impl SpectralPoint {
    pub fn new(lambda: Complex64) -> Self {
        Self { lambda, shift: None }
    }

    pub fn mesoscopic(x0: f64, eta: Complex64, n: usize, alpha: f64) -> Self {
        let lambda = x0 + eta / (n as f64).powf(alpha);
        Self { lambda, shift: Some(MesoscopicShift { x0, eta, n, alpha }) }
    }

    pub fn im(&self) -> f64 {
        self.lambda.im
    }

    fn check(&self) -> Result<()> {
        let im = self.lambda.im;
        if !im.is_finite() || !self.lambda.re.is_finite() {
            return Err(Error::invalid("lambda", "must be finite"));
        }
        if im.abs() < MIN_IMAG {
            return Err(Error::NearRealShift(im));
        }
        if im < 0.0 {
            return Err(Error::invalid("lambda", "imaginary part must be positive"));
        }
        Ok(())
    }
}

/// The bound `|G_nm| <= (2 / Im z) exp(-min(1, Im z / (4 e A)) |n - m|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombesThomasBound {
    pub coefficient_bound: f64,
    pub lambda: Complex64,
}

impl CombesThomasBound {
    pub fn new(coefficient_bound: f64, lambda: Complex64) -> Self {
        Self { coefficient_bound, lambda }
    }

    pub fn prefactor(&self) -> f64 {
        2.0 / self.lambda.im
    }

    pub fn rate(&self) -> f64 {
        (self.lambda.im / (4.0 * std::f64::consts::E * self.coefficient_bound)).min(1.0)
    }

    pub fn at(&self, distance: usize) -> f64 {
        self.prefactor() * (-self.rate() * distance as f64).exp()
    }

    /// Distance beyond which the bound drops under `tol`.
    pub fn reach(&self, tol: f64) -> usize {
        let d = (self.prefactor() / tol).ln() / self.rate();
        if d <= 0.0 {
            0
        } else if d >= usize::MAX as f64 / 2.0 {
            usize::MAX / 2
        } else {
            d.ceil() as usize
        }
    }
}

/// Buffer rows appended past the largest requested index.
pub fn truncation_buffer(coefficient_bound: f64, lambda: Complex64, cap: usize) -> Result<usize> {
    let buffer = CombesThomasBound::new(coefficient_bound, lambda).reach(BUFFER_TOL);
    if buffer > cap {
        return Err(Error::BufferOverflow { required: buffer, cap });
    }
    Ok(buffer)
}

/// A Jacobi matrix truncated to its leading `dim` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiOperator {
    coeffs: RecurrenceCoefficients,
    dim: usize,
    buffer_cap: usize,
}

impl JacobiOperator {
    pub fn new(coeffs: RecurrenceCoefficients) -> Self {
        let dim = coeffs.len();
        Self { coeffs, dim, buffer_cap: DEFAULT_BUFFER_CAP }
    }

    pub fn free(dim: usize) -> Self {
        Self::new(RecurrenceCoefficients::free(dim))
    }

    pub fn from_spec(spec: &WeightSpec, dim: usize) -> Result<Self> {
        Ok(Self::new(generate_recurrence(spec, dim)?))
    }

    /// Operator generated with enough rows to resolve indices up to
    /// `max_index` at every spectral point in `lambdas`.
    pub fn for_indices(spec: &WeightSpec, max_index: usize, lambdas: &[Complex64]) -> Result<Self> {
        let bound = spec.coefficient_bound();
        let mut buffer = 0;
        for &l in lambdas {
            SpectralPoint::new(l).check()?;
            buffer = buffer.max(truncation_buffer(bound, l, DEFAULT_BUFFER_CAP)?);
        }
        Self::from_spec(spec, max_index + buffer)
    }

    pub fn with_buffer_cap(mut self, cap: usize) -> Self {
        self.buffer_cap = cap;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim == 0 || dim > self.coeffs.len() {
            return Err(Error::InsufficientCoefficients { needed: dim, available: self.coeffs.len() });
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn coeffs(&self) -> &RecurrenceCoefficients {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn buffer_cap(&self) -> usize {
        self.buffer_cap
    }

    /// `sup a_n` over the truncation.
    pub fn coefficient_bound(&self) -> f64 {
        self.coeffs.off_diagonal()[..self.dim].iter().cloned().fold(0.0, f64::max)
    }

    /// Gershgorin bound on the operator norm.
    pub fn gershgorin_bound(&self) -> f64 {
        let a = self.coeffs.off_diagonal();
        let b = self.coeffs.diagonal();
        (0..self.dim)
            .map(|i| b[i].abs() + a[i] + if i > 0 { a[i - 1] } else { 0.0 })
            .fold(0.0, f64::max)
    }

    /// Asymptotic `(a, b)` estimated from the last coefficient.
    pub fn tail_limits(&self) -> (f64, f64) {
        (self.coeffs.a(self.dim), self.coeffs.b(self.dim))
    }

    /// Truncation size needed to resolve indices up to `max_index` at `z`.
    pub fn truncation_for(&self, z: &SpectralPoint, max_index: usize) -> Result<usize> {
        z.check()?;
        let buffer = truncation_buffer(self.coefficient_bound(), z.lambda, self.buffer_cap)?;
        let needed = max_index + buffer;
        if needed > self.dim {
            return Err(Error::InsufficientCoefficients { needed, available: self.dim });
        }
        Ok(needed)
    }

    fn shifted_lu(&self, lambda: Complex64, dim: usize) -> Result<TridiagonalLu> {
        let a = self.coeffs.off_diagonal();
        let b = self.coeffs.diagonal();
        let off: Vec<Complex64> = a[..dim - 1].iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let diag: Vec<Complex64> = b[..dim].iter().map(|&x| Complex64::new(x, 0.0) - lambda).collect();
        TridiagonalLu::factor(&off, &diag, &off)
    }
}

/// A block of `G(lambda) = (J - lambda)^-1` with 1-based index ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventWindow {
    pub rows: RangeInclusive<usize>,
    pub cols: RangeInclusive<usize>,
    pub lambda: Complex64,
    pub truncation: usize,
    pub entries: DMatrix<Complex64>,
}

impl ResolventWindow {
    /// Entry `G_jk` for `j` in `rows`, `k` in `cols`.
    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.entries[(j - self.rows.start(), k - self.cols.start())]
    }

    /// Largest column 2-norm of the block.
    pub fn max_column_norm(&self) -> f64 {
        self.entries
            .column_iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

fn check_range(r: &RangeInclusive<usize>, name: &str) -> Result<()> {
    if *r.start() == 0 || r.start() > r.end() {
        return Err(Error::invalid(name, "indices are 1-based and the range must be non-empty"));
    }
    Ok(())
}

/// Entries of the semi-infinite resolvent on `rows x cols`, from a banded
/// LU solve on a truncation padded by the Combes–Thomas buffer.
pub fn resolvent_window(
    op: &JacobiOperator,
    z: &SpectralPoint,
    rows: RangeInclusive<usize>,
    cols: RangeInclusive<usize>,
) -> Result<ResolventWindow> {
    check_range(&rows, "rows")?;
    check_range(&cols, "cols")?;
    let max_index = (*rows.end()).max(*cols.end());
    let dim = op.truncation_for(z, max_index)?;
    let lu = op.shifted_lu(z.lambda, dim)?;
    let nr = rows.end() - rows.start() + 1;
    let nc = cols.end() - cols.start() + 1;
    let mut entries = DMatrix::<Complex64>::zeros(nr, nc);
    let mut rhs = vec![Complex64::new(0.0, 0.0); dim];
    for (jc, k) in cols.clone().enumerate() {
        rhs.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        rhs[k - 1] = Complex64::new(1.0, 0.0);
        lu.solve_in_place(&mut rhs);
        for (jr, j) in rows.clone().enumerate() {
            entries[(jr, jc)] = rhs[j - 1];
        }
    }
    Ok(ResolventWindow { rows, cols, lambda: z.lambda, truncation: dim, entries })
}

/// Full column `G e_k` of the truncated resolvent of dimension `dim`.
pub fn resolvent_column(op: &JacobiOperator, lambda: Complex64, k: usize, dim: usize) -> Result<Vec<Complex64>> {
    SpectralPoint::new(lambda).check()?;
    if dim > op.dim() || k == 0 || k > dim {
        return Err(Error::InsufficientCoefficients { needed: dim.max(k), available: op.dim() });
    }
    let lu = op.shifted_lu(lambda, dim)?;
    let mut rhs = vec![Complex64::new(0.0, 0.0); dim];
    rhs[k - 1] = Complex64::new(1.0, 0.0);
    lu.solve_in_place(&mut rhs);
    Ok(rhs)
}

/// Two-sided Schur-complement factorization of `J - lambda`, giving any
/// resolvent entry in time proportional to its distance from the diagonal.
///
/// For `j < k`, `G_jk = G_jj * prod_{i=j+1..k} rho_i` with
/// `rho_i = -a_{i-1} [(J - lambda)_{[i..]}^-1]_{ii}`.
#[derive(Debug, Clone)]
pub struct GreenFunction {
    lambda: Complex64,
    diag: Vec<Complex64>,
    rho: Vec<Complex64>,
}

impl GreenFunction {
    /// Factor the truncation sized to resolve indices up to `max_index`.
    pub fn new(op: &JacobiOperator, z: &SpectralPoint, max_index: usize) -> Result<Self> {
        let dim = op.truncation_for(z, max_index)?;
        Ok(Self::on_truncation(op.coeffs(), z.lambda, dim))
    }

    pub fn on_truncation(coeffs: &RecurrenceCoefficients, lambda: Complex64, dim: usize) -> Self {
        let a = coeffs.off_diagonal();
        let b = coeffs.diagonal();
        let shifted = |i: usize| Complex64::new(b[i], 0.0) - lambda;
        let mut upper = vec![Complex64::new(0.0, 0.0); dim];
        upper[dim - 1] = shifted(dim - 1).inv();
        for i in (0..dim - 1).rev() {
            upper[i] = (shifted(i) - a[i] * a[i] * upper[i + 1]).inv();
        }
        let mut lower = Complex64::new(0.0, 0.0);
        let mut diag = Vec::with_capacity(dim);
        for i in 0..dim {
            let mut d = shifted(i);
            if i > 0 {
                d -= a[i - 1] * a[i - 1] * lower;
            }
            let left = d;
            if i + 1 < dim {
                d -= a[i] * a[i] * upper[i + 1];
            }
            diag.push(d.inv());
            lower = left.inv();
        }
        let mut rho = vec![Complex64::new(0.0, 0.0); dim];
        for i in 1..dim {
            rho[i] = -a[i - 1] * upper[i];
        }
        Self { lambda, diag, rho }
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `G_jj`, 1-based.
    pub fn diagonal(&self, j: usize) -> Complex64 {
        self.diag[j - 1]
    }

    /// `G_jk`, 1-based.
    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        let (s, r) = if j <= k { (j, k) } else { (k, j) };
        let mut g = self.diag[s - 1];
        for i in s..r {
            g *= self.rho[i];
        }
        g
    }

    /// `G_{j, j}, G_{j, j+1}, ..., G_{j, j+len-1}` into `out`.
    pub fn row_segment(&self, j: usize, out: &mut [Complex64]) {
        if out.is_empty() {
            return;
        }
        let mut g = self.diag[j - 1];
        out[0] = g;
        for (t, slot) in out.iter_mut().enumerate().skip(1) {
            g *= self.rho[j - 1 + t];
            *slot = g;
        }
    }
}

/// `omega(lambda)`: the root of `w^2 - lambda w + 1 = 0` inside the unit disk.
pub fn omega(lambda: Complex64) -> Result<Complex64> {
    if !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(Error::invalid("lambda", "must be finite"));
    }
    let dist = if lambda.re.abs() <= 2.0 {
        lambda.im.abs()
    } else {
        Complex64::new(lambda.re.abs() - 2.0, lambda.im).norm()
    };
    if dist < CUT_TOL {
        return Err(Error::OnCut { re: lambda.re, im: lambda.im });
    }
    let s = (lambda - 2.0).sqrt() * (lambda + 2.0).sqrt();
    // (lambda + s) / 2 is the root outside the disk; invert it to avoid cancellation
    Ok(2.0 / (lambda + s))
}

/// Closed form `(w^|j-k| - w^(j+k)) / (w - 1/w)` of the free resolvent.
pub fn free_resolvent_entry(lambda: Complex64, j: usize, k: usize) -> Result<Complex64> {
    if lambda.im == 0.0 {
        return Err(Error::NearRealShift(0.0));
    }
    if j == 0 || k == 0 {
        return Err(Error::invalid("index", "indices are 1-based"));
    }
    let w = omega(lambda)?;
    let near = w.powu(j.abs_diff(k) as u32);
    let far = w.powu((j + k) as u32);
    Ok((near - far) / (w - w.inv()))
}

/// Per-distance summary of a Combes–Thomas certification.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub bound: CombesThomasBound,
    /// `(|n - m|, max |G_nm|, bound)` for each distance.
    pub rows: Vec<(usize, f64, f64)>,
    pub max_ratio: f64,
}

/// Check the decay bound on the window `[1, 2 radius + 1]^2`.
pub fn certify_combes_thomas(op: &JacobiOperator, z: &SpectralPoint, radius: usize) -> Result<CertificationReport> {
    certify_combes_thomas_on(op, z, 1..=2 * radius + 1, radius)
}

/// Check the decay bound for all pairs in `window^2` with `|n - m| <= radius`.
pub fn certify_combes_thomas_on(
    op: &JacobiOperator,
    z: &SpectralPoint,
    window: RangeInclusive<usize>,
    radius: usize,
) -> Result<CertificationReport> {
    let g = resolvent_window(op, z, window.clone(), window.clone())?;
    let bound = CombesThomasBound::new(op.coefficient_bound(), z.lambda);
    let mut max_abs = vec![0.0f64; radius + 1];
    let mut worst = (0.0f64, 0, 0);
    for j in window.clone() {
        for k in window.clone() {
            let d = j.abs_diff(k);
            if d > radius {
                continue;
            }
            let v = g.get(j, k).norm();
            max_abs[d] = max_abs[d].max(v);
            let ratio = v / bound.at(d);
            if ratio > worst.0 {
                worst = (ratio, j, k);
            }
        }
    }
    if worst.0 > 1.0 {
        return Err(Error::ViolationFound { row: worst.1, col: worst.2, ratio: worst.0 });
    }
    let rows = max_abs.iter().enumerate().map(|(d, &m)| (d, m, bound.at(d))).collect();
    Ok(CertificationReport { bound, rows, max_ratio: worst.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn omega_at_two_and_a_half() {
        let w = omega(c(2.5, 0.0)).unwrap();
        assert!((w - c(0.5, 0.0)).norm() < 1e-15);
        let w = omega(c(-2.5, 0.0)).unwrap();
        assert!((w - c(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn omega_rejects_the_cut() {
        assert!(matches!(omega(c(1.0, 0.0)), Err(Error::OnCut { .. })));
        assert!(matches!(omega(c(2.0, 1e-15)), Err(Error::OnCut { .. })));
        assert!(omega(c(2.0, 1e-6)).is_ok());
    }

    #[test]
    fn free_entry_large_shift_asymptotics() {
        let t = 1e6;
        let g = free_resolvent_entry(c(0.0, t), 1, 1).unwrap();
        assert!((g * c(0.0, t) + 1.0).norm() < 1e-10);
    }

    #[test]
    fn free_entry_deep_interior_is_toeplitz() {
        let l = c(0.3, 0.4);
        let w = omega(l).unwrap();
        let g = free_resolvent_entry(l, 200, 203).unwrap();
        let toeplitz = w.powu(3) / (w - w.inv());
        assert!((g - toeplitz).norm() < 1e-12);
    }

    #[test]
    fn near_real_shift_is_rejected() {
        let op = JacobiOperator::free(100);
        let z = SpectralPoint::new(c(0.0, 1e-13));
        assert!(matches!(resolvent_window(&op, &z, 1..=2, 1..=2), Err(Error::NearRealShift(_))));
    }

    #[test]
    fn buffer_cap_is_enforced() {
        let op = JacobiOperator::free(100).with_buffer_cap(10);
        let z = SpectralPoint::new(c(0.0, 0.5));
        assert!(matches!(resolvent_window(&op, &z, 1..=2, 1..=2), Err(Error::BufferOverflow { .. })));
    }

    #[test]
    fn short_operator_reports_missing_rows() {
        let op = JacobiOperator::free(50);
        let z = SpectralPoint::new(c(0.0, 0.5));
        assert!(matches!(
            resolvent_window(&op, &z, 1..=2, 1..=2),
            Err(Error::InsufficientCoefficients { .. })
        ));
    }

    #[test]
    fn schur_entries_match_lu() {
        let spec = WeightSpec::PerturbedFree { beta: 0.5, amplitude: 0.4, seed: 3 };
        let z = SpectralPoint::new(c(0.7, 0.2));
        let op = JacobiOperator::for_indices(&spec, 60, &[z.lambda]).unwrap();
        let w = resolvent_window(&op, &z, 20..=60, 30..=50).unwrap();
        let gf = GreenFunction::new(&op, &z, 60).unwrap();
        for j in 20..=60 {
            for k in 30..=50 {
                assert!((w.get(j, k) - gf.entry(j, k)).norm() < 1e-12, "({j},{k})");
            }
        }
        let mut seg = vec![c(0.0, 0.0); 10];
        gf.row_segment(25, &mut seg);
        for (t, v) in seg.iter().enumerate() {
            assert!((v - gf.entry(25, 25 + t)).norm() < 1e-14);
        }
    }

    #[test]
    fn free_operator_certifies() {
        let op = JacobiOperator::free(20_000);
        let z = SpectralPoint::new(c(1.0, 0.5));
        let rep = certify_combes_thomas(&op, &z, 100).unwrap();
        assert!(rep.max_ratio <= 1.0);
        assert_eq!(rep.rows.len(), 101);
        assert!((rep.rows[0].2 - 4.0).abs() < 1e-12);
        assert!(rep.rows[0].1 <= 2.0);
    }

    #[test]
    fn gershgorin_of_free() {
        assert_eq!(JacobiOperator::free(10).gershgorin_bound(), 2.0);
    }
}
