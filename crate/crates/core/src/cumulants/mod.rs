//! Cumulants of mesoscopic linear statistics from the operator-trace formula.
//!
//! With `A = f(n^alpha (J - x0))` and `P` the projection on the first `n`
//! coordinates, the cumulant of order `m` (Taylor convention, so
//! `C_2 = Var / 2`) is
//!
//! `C_m = sum_j (-1)^(j+1)/j sum_{l_1+..+l_j=m} (Tr P A^l_1 P .. P A^l_j P - Tr P A^m P) / (l_1! .. l_j!)`.
//!
//! The subtracted term vanishes in exact arithmetic and removes the bulk
//! of the cancellation. Only indices near `n` contribute, so the symbol is
//! built on a window around `n` of half-width `W`.

pub mod compare;
pub mod compositions;
pub mod fredholm;
pub mod variance;

use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::funcspace::{fit_best, DEFAULT_DELTA};
use crate::linalg::{compensated_sum, CompensatedSum};
use crate::operator::{omega, truncation_buffer, GreenFunction, JacobiOperator, SpectralPoint, DEFAULT_BUFFER_CAP};
use crate::testfn::{PoleCombination, TestFunction};

pub use compare::{cumulant_difference, CompareOptions, CumulantDifference};
pub use fredholm::{fredholm_log_generating, FredholmOracle};
pub use variance::variance_cd;

pub const MAX_ORDER: usize = 8;
/// Per-entry tail tolerance defining the band width.
pub const BAND_TOL: f64 = 1e-12;
/// Tolerance of the imaginary residue left by `(G(l) - G(conj l)) / 2i`.
pub const REALITY_TOL: f64 = 1e-12;
/// Largest dense symbol window, in rows.
pub const MAX_WINDOW_ROWS: usize = 8192;
/// Most translates tried when a sampled test function is first fitted by poles.
pub const DEFAULT_FIT_TRANSLATES: usize = 40;

/// Bulk point, scale exponent and ensemble size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MesoscopicFrame {
    pub x0: f64,
    pub alpha: f64,
    pub n: usize,
}

impl MesoscopicFrame {
    pub fn new(x0: f64, alpha: f64, n: usize) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::invalid("frame.x0", "must be finite"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("frame.alpha", format!("{alpha} must lie in (0, 1)")));
        }
        if n < 1 {
            return Err(Error::invalid("frame.n", "must be at least 1"));
        }
        Ok(Self { x0, alpha, n })
    }

    /// `n^alpha`.
    pub fn scale(&self) -> f64 {
        (self.n as f64).powf(self.alpha)
    }

    /// `x0 + eta / n^alpha`.
    pub fn spectral_point(&self, eta: Complex64) -> SpectralPoint {
        SpectralPoint::mesoscopic(self.x0, eta, self.n, self.alpha)
    }

    /// `x -> n^alpha (x - x0)`.
    pub fn local(&self, x: f64) -> f64 {
        self.scale() * (x - self.x0)
    }
}

/// The coordinate projection `P_n`; `Q_n = I - P_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectionSpec {
    pub n: usize,
}

impl ProjectionSpec {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn contains(&self, index: usize) -> bool {
        index >= 1 && index <= self.n
    }
}

/// Window of the real symmetric matrix `f(n^alpha (J - x0))` for a pole
/// combination, with entries beyond the band set to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    first: usize,
    data: DMatrix<f64>,
    band: usize,
    diag_prefix: f64,
    tail: TailModel,
}

/// Free-case majorant `|F_rs| <= scale * q^|r - s|` used for error estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub scale: f64,
    pub q: f64,
}

impl TailModel {
    /// `sum_{d > w} d scale q^d`: mass of the straddling entries beyond the band.
    pub fn straddling_mass(&self, w: usize) -> f64 {
        let q = self.q;
        let w = w as f64;
        self.scale * q.powf(w + 1.0) * ((w + 1.0) - w * q) / (1.0 - q).powi(2)
    }
}

impl SymbolMatrix {
    /// First global (1-based) index of the window.
    pub fn first(&self) -> usize {
        self.first
    }

    pub fn last(&self) -> usize {
        self.first + self.data.nrows() - 1
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// `sum_{j < first} F_jj`, needed for the first cumulant.
    pub fn diagonal_prefix(&self) -> f64 {
        self.diag_prefix
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    /// Entry at global indices; zero outside the band or the window.
    pub fn get(&self, r: usize, s: usize) -> f64 {
        if r < self.first || s < self.first || r > self.last() || s > self.last() {
            return 0.0;
        }
        self.data[(r - self.first, s - self.first)]
    }

    /// Zero matrix on `rows`, mostly useful for tests.
    pub fn zeros(rows: RangeInclusive<usize>) -> Self {
        let len = rows.end() - rows.start() + 1;
        Self { first: *rows.start(), data: DMatrix::zeros(len, len), band: len, diag_prefix: 0.0, tail: TailModel { scale: 0.0, q: 0.0 } }
    }

    /// Wrap an explicit symmetric matrix placed at global index `first`.
    pub fn from_dense(first: usize, data: DMatrix<f64>) -> Result<Self> {
        if first == 0 || !data.is_square() || data.nrows() == 0 {
            return Err(Error::invalid("symbol", "needs a non-empty square block at a 1-based index"));
        }
        let band = data.nrows();
        Ok(Self { first, data, band, diag_prefix: 0.0, tail: TailModel { scale: 0.0, q: 0.0 } })
    }
}

fn poles_of(f: &TestFunction) -> Result<PoleCombination> {
    match f {
        TestFunction::PoleCombination(p) => Ok(p.clone()),
        TestFunction::SampledC1(s) => Ok(fit_best(s, DEFAULT_FIT_TRANSLATES, DEFAULT_DELTA)?.poles),
    }
}

/// `lambda` in the normalization where the coefficients tend to `(1, 0)`.
fn normalized(lambda: Complex64, limits: (f64, f64)) -> Complex64 {
    (lambda - limits.1) / limits.0
}

/// Band width `W = ceil(ln(1 / BAND_TOL) / rate)` where `rate` is the
/// slowest free-case decay `-ln |omega|` among the poles.
pub fn band_width(frame: &MesoscopicFrame, f: &PoleCombination, limits: (f64, f64)) -> Result<usize> {
    let q = decay_ratio(frame, f, limits)?;
    Ok(((1.0 / BAND_TOL).ln() / -q.ln()).ceil() as usize)
}

fn decay_ratio(frame: &MesoscopicFrame, f: &PoleCombination, limits: (f64, f64)) -> Result<f64> {
    if !(limits.0 > 0.0) {
        return Err(Error::invalid("limits", "asymptotic off-diagonal must be positive"));
    }
    let mut q = 0.0f64;
    for &eta in f.poles() {
        let w = omega(normalized(frame.spectral_point(eta).lambda, limits))?;
        q = q.max(w.norm());
    }
    Ok(q)
}

fn tail_model(frame: &MesoscopicFrame, f: &PoleCombination, limits: (f64, f64)) -> Result<TailModel> {
    let mut scale = 0.0;
    let mut q = 0.0f64;
    for (&c, &eta) in f.coefficients().iter().zip(f.poles()) {
        let w = omega(normalized(frame.spectral_point(eta).lambda, limits))?;
        scale += 2.0 * c.abs() / (w - w.inv()).norm() / limits.0;
        q = q.max(w.norm());
    }
    Ok(TailModel { scale: scale / frame.scale(), q })
}

/// Number of rows an operator needs for a symbol window ending at `last`.
pub fn required_dimension(frame: &MesoscopicFrame, f: &PoleCombination, coefficient_bound: f64, last: usize) -> Result<usize> {
    let mut buffer = 0;
    for &eta in f.poles() {
        buffer = buffer.max(truncation_buffer(coefficient_bound, frame.spectral_point(eta).lambda, DEFAULT_BUFFER_CAP)?);
    }
    Ok(last + buffer)
}

/// Operator dimension sufficient for the localized cumulant window at
/// `frame`, given the asymptotic coefficients and their bound.
pub fn operator_dimension(frame: &MesoscopicFrame, f: &PoleCombination, limits: (f64, f64), coefficient_bound: f64) -> Result<usize> {
    let w = band_width(frame, f, limits)?;
    required_dimension(frame, f, coefficient_bound, frame.n + w)
}

/// The symbol on `[1, n + W]`.
pub fn symbol_matrix(op: &JacobiOperator, frame: &MesoscopicFrame, f: &TestFunction) -> Result<SymbolMatrix> {
    let poles = poles_of(f)?;
    let w = band_width(frame, &poles, op.tail_limits())?;
    symbol_window(op, frame, &poles, 1..=frame.n + w, w)
}

/// The symbol on `[max(1, n - W + 1), n + W]`, enough for every cumulant.
pub fn localized_symbol(op: &JacobiOperator, frame: &MesoscopicFrame, f: &PoleCombination, band: Option<usize>) -> Result<SymbolMatrix> {
    let w = match band {
        Some(w) => w,
        None => band_width(frame, f, op.tail_limits())?,
    };
    let first = if frame.n > w { frame.n - w + 1 } else { 1 };
    symbol_window(op, frame, f, first..=frame.n + w, w)
}

/// Symbol window on `rows` with band `band`.
pub fn symbol_window(
    op: &JacobiOperator,
    frame: &MesoscopicFrame,
    f: &PoleCombination,
    rows: RangeInclusive<usize>,
    band: usize,
) -> Result<SymbolMatrix> {
    if *rows.start() == 0 || rows.start() > rows.end() {
        return Err(Error::invalid("rows", "indices are 1-based and the range must be non-empty"));
    }
    let first = *rows.start();
    let last = *rows.end();
    let len = last - first + 1;
    if len > MAX_WINDOW_ROWS {
        return Err(Error::BufferOverflow { required: len, cap: MAX_WINDOW_ROWS });
    }
    let scale = frame.scale();
    let mut acc = DMatrix::<Complex64>::zeros(len, len);
    let mut prefix = Complex64::new(0.0, 0.0);
    let mut seg = vec![Complex64::new(0.0, 0.0); band.min(len - 1) + 1];
    let mut seg_conj = seg.clone();
    let two_i = Complex64::new(0.0, 2.0);
    for (&c, &eta) in f.coefficients().iter().zip(f.poles()) {
        let z = frame.spectral_point(eta);
        let g = GreenFunction::new(op, &z, last)?;
        let gc = GreenFunction::on_truncation(op.coeffs(), z.lambda.conj(), g.dim());
        let w = c / scale;
        for j in 1..first {
            prefix += w * (g.diagonal(j) - gc.diagonal(j)) / two_i;
        }
        for r in first..=last {
            let width = band.min(last - r) + 1;
            g.row_segment(r, &mut seg[..width]);
            gc.row_segment(r, &mut seg_conj[..width]);
            for t in 0..width {
                acc[(r - first, r - first + t)] += w * (seg[t] - seg_conj[t]) / two_i;
            }
        }
    }
    let mut residue = prefix.im.abs();
    let mut data = DMatrix::<f64>::zeros(len, len);
    for i in 0..len {
        for k in i..len {
            let v = acc[(i, k)];
            residue = residue.max(v.im.abs());
            data[(i, k)] = v.re;
            data[(k, i)] = v.re;
        }
    }
    if residue > REALITY_TOL {
        return Err(Error::ComplexTrace(residue));
    }
    let tail = tail_model(frame, f, op.tail_limits())?;
    Ok(SymbolMatrix { first, data, band, diag_prefix: prefix.re, tail })
}

/// Rows of the window that belong to `P`.
fn projected_rows(f: &SymbolMatrix, p: &ProjectionSpec) -> Result<usize> {
    if p.n + 1 < f.first() || p.n > f.last() {
        return Err(Error::invalid(
            "projection",
            format!("boundary {} lies outside the window [{}, {}]", p.n, f.first(), f.last()),
        ));
    }
    Ok(p.n + 1 - f.first())
}

fn check_order(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("m", "cumulant orders start at 1"));
    }
    if m > MAX_ORDER {
        return Err(Error::OrderTooLarge(m));
    }
    Ok(())
}

/// Cumulant `C_m` of the statistic whose symbol is `f`.
///
/// `m = 2` uses the reduced form `(1/2) Tr P A Q A P`, which is the
/// composition sum after cancellation; higher orders enumerate
/// compositions.
pub fn cumulant(f: &SymbolMatrix, p: &ProjectionSpec, m: usize) -> Result<f64> {
    check_order(m)?;
    let rows = projected_rows(f, p)?;
    let a = f.data();
    match m {
        1 => {
            let mut s = CompensatedSum::new();
            s.add(f.diagonal_prefix());
            for i in 0..rows {
                s.add(a[(i, i)]);
            }
            Ok(s.value())
        }
        2 => {
            let mut s = CompensatedSum::new();
            for k in rows..a.ncols() {
                for i in 0..rows {
                    s.add(a[(i, k)] * a[(i, k)]);
                }
            }
            Ok(0.5 * s.value())
        }
        _ => composition_sum(f, p, m),
    }
}

/// The full composition sum, valid for every `m >= 2`.
pub fn composition_sum(f: &SymbolMatrix, p: &ProjectionSpec, m: usize) -> Result<f64> {
    check_order(m)?;
    let rows = projected_rows(f, p)?;
    if rows == 0 {
        return Ok(0.0);
    }
    let a = f.data();
    let mut power = a.clone();
    let mut blocks = vec![DMatrix::<f64>::zeros(0, 0), a.view((0, 0), (rows, rows)).into_owned()];
    for _ in 2..=m {
        power = &power * a;
        blocks.push(power.view((0, 0), (rows, rows)).into_owned());
    }
    let reference = blocks[m].trace();
    let mut acc = CompensatedSum::new();
    walk(&blocks, None, m, 0, 1.0, reference, &mut acc);
    Ok(acc.value())
}

fn walk(
    blocks: &[DMatrix<f64>],
    prefix: Option<&DMatrix<f64>>,
    remaining: usize,
    parts: usize,
    factorials: f64,
    reference: f64,
    acc: &mut CompensatedSum,
) {
    for l in 1..=remaining {
        let fl = factorials * compositions::factorial(l);
        if l == remaining {
            let trace = match prefix {
                None => blocks[l].trace(),
                Some(mtx) => mtx.dot(&blocks[l]),
            };
            let j = parts + 1;
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            acc.add(sign / (j as f64 * fl) * (trace - reference));
        } else {
            let next = match prefix {
                None => blocks[l].clone(),
                Some(mtx) => mtx * &blocks[l],
            };
            walk(blocks, Some(&next), remaining - l, parts + 1, fl, reference, acc);
        }
    }
}

/// Error estimate for `C_m` on a window with band `band`: the free-case
/// tail mass of dropped entries propagated through the composition sum,
/// plus a rounding floor for the dense products.
pub fn truncation_error(f: &SymbolMatrix, m: usize) -> f64 {
    let a = f.data();
    let norm = (0..a.nrows())
        .map(|i| compensated_sum(a.row(i).iter().map(|x| x.abs())))
        .fold(0.0, f64::max)
        .max(f.tail().scale);
    let weights = if m == 1 { 1.0 } else { compositions::absolute_weight_sum(m) };
    let dropped = 2.0 * m as f64 * weights * norm.powi(m as i32 - 1) * f.tail().straddling_mass(f.band());
    let rounding = 8.0 * f64::EPSILON * a.nrows() as f64 * weights * norm.powi(m as i32);
    dropped + rounding
}

/// Cumulants at one frame with error estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantReport {
    pub frame: MesoscopicFrame,
    pub m_values: Vec<usize>,
    pub values: Vec<f64>,
    pub truncation_error: Vec<f64>,
    pub band: usize,
}

impl CumulantReport {
    pub fn value(&self, m: usize) -> Option<f64> {
        self.m_values.iter().position(|&k| k == m).map(|i| self.values[i])
    }
}

/// `C_m` for every `m` in `orders`, on the localized window.
pub fn compute_cumulants(op: &JacobiOperator, frame: &MesoscopicFrame, f: &TestFunction, orders: &[usize]) -> Result<CumulantReport> {
    compute_cumulants_with_band(op, frame, f, orders, None)
}

/// As [`compute_cumulants`] with an explicit band width.
pub fn compute_cumulants_with_band(
    op: &JacobiOperator,
    frame: &MesoscopicFrame,
    f: &TestFunction,
    orders: &[usize],
    band: Option<usize>,
) -> Result<CumulantReport> {
    for &m in orders {
        check_order(m)?;
    }
    let poles = poles_of(f)?;
    let sym = localized_symbol(op, frame, &poles, band)?;
    let p = ProjectionSpec::new(frame.n);
    let mut values = Vec::with_capacity(orders.len());
    let mut errs = Vec::with_capacity(orders.len());
    for &m in orders {
        values.push(cumulant(&sym, &p, m)?);
        errs.push(truncation_error(&sym, m));
    }
    Ok(CumulantReport { frame: *frame, m_values: orders.to_vec(), values, truncation_error: errs, band: sym.band() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::free_resolvent_entry;

    fn free_setup(n: usize, alpha: f64) -> (JacobiOperator, MesoscopicFrame, PoleCombination) {
        let frame = MesoscopicFrame::new(0.0, alpha, n).unwrap();
        let f = PoleCombination::single();
        let dim = operator_dimension(&frame, &f, (1.0, 0.0), 1.0).unwrap();
        (JacobiOperator::free(dim), frame, f)
    }

    #[test]
    fn frame_validation() {
        assert!(MesoscopicFrame::new(0.0, 1.0, 10).is_err());
        assert!(MesoscopicFrame::new(0.0, 0.0, 10).is_err());
        assert!(MesoscopicFrame::new(f64::NAN, 0.5, 10).is_err());
    }

    #[test]
    fn free_symbol_matches_closed_form() {
        let (op, frame, f) = free_setup(60, 0.4);
        let sym = symbol_matrix(&op, &frame, &f.clone().into()).unwrap();
        assert_eq!(sym.first(), 1);
        let lambda = frame.spectral_point(Complex64::new(0.0, 1.0)).lambda;
        for (r, s) in [(1, 1), (3, 7), (60, 60), (59, 75)] {
            let exact = free_resolvent_entry(lambda, r, s).unwrap().im / frame.scale();
            assert!((sym.get(r, s) - exact).abs() < 1e-12, "({r},{s})");
            assert_eq!(sym.get(r, s), sym.get(s, r));
        }
    }

    #[test]
    fn reduced_second_order_matches_compositions() {
        let (op, frame, f) = free_setup(80, 0.4);
        let sym = localized_symbol(&op, &frame, &f, None).unwrap();
        let p = ProjectionSpec::new(frame.n);
        let reduced = cumulant(&sym, &p, 2).unwrap();
        let full = composition_sum(&sym, &p, 2).unwrap();
        assert!((reduced - full).abs() < 1e-12, "{reduced} vs {full}");
    }

    #[test]
    fn zero_symbol_has_zero_cumulants() {
        let sym = SymbolMatrix::zeros(1..=30);
        let p = ProjectionSpec::new(15);
        for m in 1..=8 {
            assert_eq!(cumulant(&sym, &p, m).unwrap(), 0.0);
        }
    }

    #[test]
    fn order_limits() {
        let sym = SymbolMatrix::zeros(1..=10);
        let p = ProjectionSpec::new(5);
        assert_eq!(cumulant(&sym, &p, 9), Err(Error::OrderTooLarge(9)));
        assert!(cumulant(&sym, &p, 0).unwrap_err().is_validation());
    }

    #[test]
    fn localized_window_reproduces_full_window() {
        let (op, frame, f) = free_setup(120, 0.3);
        let p = ProjectionSpec::new(frame.n);
        let full = symbol_matrix(&op, &frame, &f.clone().into()).unwrap();
        let local = localized_symbol(&op, &frame, &f, None).unwrap();
        for m in 1..=4 {
            let a = cumulant(&full, &p, m).unwrap();
            let b = cumulant(&local, &p, m).unwrap();
            assert!((a - b).abs() < 1e-10, "m = {m}: {a} vs {b}");
        }
    }

    #[test]
    fn projection_outside_window_is_rejected() {
        let sym = SymbolMatrix::zeros(10..=20);
        assert!(cumulant(&sym, &ProjectionSpec::new(3), 2).is_err());
        assert!(cumulant(&sym, &ProjectionSpec::new(9), 2).is_ok());
    }

    #[test]
    fn matrix_cumulants_of_a_projection_pair() {
        // 2x2 symbol diag(x, y) with P on the first row: only C_1 survives
        let data = DMatrix::from_row_slice(2, 2, &[0.7, 0.0, 0.0, -0.2]);
        let sym = SymbolMatrix::from_dense(1, data).unwrap();
        let p = ProjectionSpec::new(1);
        assert!((cumulant(&sym, &p, 1).unwrap() - 0.7).abs() < 1e-15);
        for m in 2..=5 {
            assert!(cumulant(&sym, &p, m).unwrap().abs() < 1e-15);
        }
    }
}
