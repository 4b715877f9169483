//! Toeplitz and Hankel calculus for the free resolvent symbols.
//!
//! Indices are 1-based: `T(a)_jk = a_{j-k}` and `H(a)_jk = a_{j+k-1}`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, log_abs_det, trace_norm};
use crate::operator::omega;

/// Tail level at which a symbol is cut off.
pub const SYMBOL_TOL: f64 = 1e-14;
const MAX_CUTOFF: usize = 1 << 22;

/// Two-sided coefficients `a_k`, `k = -K..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentSymbol {
    coeffs: Vec<f64>,
    cutoff: usize,
}

impl LaurentSymbol {
    /// `coeffs[k + K] = a_k`; the length must be odd.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(Error::invalid("symbol", "coefficient list must have odd length 2K + 1"));
        }
        let cutoff = coeffs.len() / 2;
        Ok(Self { coeffs, cutoff })
    }

    pub fn from_fn(cutoff: usize, f: impl Fn(isize) -> f64) -> Self {
        let k = cutoff as isize;
        Self { coeffs: (-k..=k).map(f).collect(), cutoff }
    }

    /// The constant symbol `1`.
    pub fn identity() -> Self {
        Self { coeffs: vec![1.0], cutoff: 0 }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn get(&self, k: isize) -> f64 {
        if k.unsigned_abs() > self.cutoff {
            0.0
        } else {
            self.coeffs[(k + self.cutoff as isize) as usize]
        }
    }

    /// `sum_{k >= 0} a_k z^k`.
    pub fn plus(&self) -> Self {
        Self::from_fn(self.cutoff, |k| if k >= 0 { self.get(k) } else { 0.0 })
    }

    /// `sum_{k < 0} a_k z^k`.
    pub fn minus(&self) -> Self {
        Self::from_fn(self.cutoff, |k| if k < 0 { self.get(k) } else { 0.0 })
    }

    /// `a(1/z)`.
    pub fn reflected(&self) -> Self {
        Self::from_fn(self.cutoff, |k| self.get(-k))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * s).collect(), cutoff: self.cutoff }
    }

    /// Symbol of the product `a(z) b(z)`.
    pub fn mul(&self, other: &Self) -> Self {
        let k = self.cutoff + other.cutoff;
        Self::from_fn(k, |m| {
            let lo = (m - other.cutoff as isize).max(-(self.cutoff as isize));
            let hi = (m + other.cutoff as isize).min(self.cutoff as isize);
            compensated_sum((lo..=hi).map(|j| self.get(j) * other.get(m - j)))
        })
    }

    pub fn tail_bound(&self) -> f64 {
        let k = self.cutoff as isize;
        self.get(k).abs().max(self.get(-k).abs())
    }

    pub fn l1_norm(&self) -> f64 {
        compensated_sum(self.coeffs.iter().map(|c| c.abs()))
    }

    /// `(sum_{k>=1} k a_k^2, sum_{k>=1} k a_{-k}^2)`.
    pub fn sobolev_sums(&self) -> (f64, f64) {
        let k = self.cutoff as isize;
        (
            compensated_sum((1..=k).map(|j| j as f64 * self.get(j).powi(2))),
            compensated_sum((1..=k).map(|j| j as f64 * self.get(-j).powi(2))),
        )
    }

    /// `Tr H(a) H(a~) = sum_{k>=1} k a_k a_{-k}`.
    pub fn hankel_trace(&self) -> f64 {
        compensated_sum((1..=self.cutoff as isize).map(|j| j as f64 * self.get(j) * self.get(-j)))
    }

    /// `sum_{k > from} k (a_k^2 + a_{-k}^2)`.
    fn sobolev_tail(&self, from: usize) -> f64 {
        compensated_sum(
            ((from + 1) as isize..=self.cutoff as isize).map(|j| j as f64 * (self.get(j).powi(2) + self.get(-j).powi(2))),
        )
    }

    pub fn is_symmetric(&self) -> bool {
        (1..=self.cutoff as isize).all(|k| self.get(k) == self.get(-k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    Toeplitz,
    Hankel,
}

/// A finite section of `T(a)` or `H(a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMatrix {
    pub kind: StructureKind,
    pub symbol: LaurentSymbol,
    pub size: usize,
}

impl StructuredMatrix {
    pub fn toeplitz(symbol: LaurentSymbol, size: usize) -> Self {
        Self { kind: StructureKind::Toeplitz, symbol, size }
    }

    pub fn hankel(symbol: LaurentSymbol, size: usize) -> Self {
        Self { kind: StructureKind::Hankel, symbol, size }
    }

    /// Entry `(j, k)`, 1-based.
    pub fn entry(&self, j: usize, k: usize) -> f64 {
        match self.kind {
            StructureKind::Toeplitz => self.symbol.get(j as isize - k as isize),
            StructureKind::Hankel => self.symbol.get((j + k - 1) as isize),
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        self.block(self.size, self.size)
    }

    /// Leading `rows x cols` block of the infinite matrix.
    pub fn block(&self, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |j, k| self.entry(j + 1, k + 1))
    }
}

fn toeplitz_block(a: &LaurentSymbol, rows: usize, cols: usize) -> DMatrix<f64> {
    StructuredMatrix::toeplitz(a.clone(), rows.max(cols)).block(rows, cols)
}

fn hankel_block(a: &LaurentSymbol, rows: usize, cols: usize) -> DMatrix<f64> {
    StructuredMatrix::hankel(a.clone(), rows.max(cols)).block(rows, cols)
}

/// `P T(a) T(b) P` on `size x size`, exact for finitely supported symbols.
pub fn toeplitz_product(a: &LaurentSymbol, b: &LaurentSymbol, size: usize) -> DMatrix<f64> {
    let inner = size + a.cutoff().min(b.cutoff());
    toeplitz_block(a, size, inner) * toeplitz_block(b, inner, size)
}

/// `P H(a) H(b) P` on `size x size`, exact for finitely supported symbols.
pub fn hankel_product(a: &LaurentSymbol, b: &LaurentSymbol, size: usize) -> DMatrix<f64> {
    let inner = a.cutoff().min(b.cutoff()).max(1);
    hankel_block(a, size, inner) * hankel_block(b, inner, size)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Residual of an exact identity on a finite section, with the allowance
/// due to symbol cutoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    pub residual: f64,
    pub allowance: f64,
}

/// `T(ab) - T(a) T(b) - H(a) H(b~)` on `size x size`.
pub fn product_identity_check(a: &LaurentSymbol, b: &LaurentSymbol, size: usize) -> IdentityResidual {
    let lhs = toeplitz_block(&a.mul(b), size, size);
    let rhs = toeplitz_product(a, b, size) + hankel_product(a, &b.reflected(), size);
    IdentityResidual {
        residual: max_abs(&(lhs - rhs)),
        allowance: 2.0 * (a.tail_bound() * b.l1_norm() + b.tail_bound() * a.l1_norm()),
    }
}

/// `[T(a+), T(a-)] + H(a) H(a~)` on `size x size`.
pub fn commutator_check(phi: &LaurentSymbol, size: usize) -> IdentityResidual {
    let (p, m) = (phi.plus(), phi.minus());
    let comm = toeplitz_product(&p, &m, size) - toeplitz_product(&m, &p, size);
    let hh = hankel_product(phi, &phi.reflected(), size);
    IdentityResidual { residual: max_abs(&(comm + hh)), allowance: 4.0 * phi.tail_bound() * phi.l1_norm() }
}

/// Trace norm of the section of `[T(a+), T(a-)]` and the bound
/// `(sum k a_k^2)^(1/2) (sum k a_{-k}^2)^(1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceNormCheck {
    pub trace_norm: f64,
    pub bound: f64,
}

pub fn trace_norm_bound_check(phi: &LaurentSymbol, size: usize) -> TraceNormCheck {
    let (p, m) = (phi.plus(), phi.minus());
    let comm = toeplitz_product(&p, &m, size) - toeplitz_product(&m, &p, size);
    let (sp, sm) = phi.sobolev_sums();
    TraceNormCheck { trace_norm: trace_norm(&comm), bound: (sp * sm).sqrt() }
}

/// Coefficients of `exp(t h(z))` for `h = sum_{k >= 0} h_k z^k`, up to `len`.
fn analytic_exp(h: &[f64], t: f64, len: usize) -> Vec<f64> {
    let mut g = vec![0.0; len];
    if len == 0 {
        return g;
    }
    g[0] = 1.0;
    for k in 1..len {
        let s = compensated_sum((1..=k.min(h.len() - 1)).map(|j| j as f64 * h[j] * g[k - j]));
        g[k] = t * s / k as f64;
    }
    let e0 = (t * h[0]).exp();
    g.iter_mut().for_each(|x| *x *= e0);
    g
}

/// Lower-triangular section `T(exp(t a+))` with `a+` the `k >= 0` part.
fn lower_exp(phi: &LaurentSymbol, t: f64, size: usize) -> DMatrix<f64> {
    let h: Vec<f64> = (0..=phi.cutoff() as isize).map(|k| phi.get(k)).collect();
    let g = analytic_exp(&h, t, size);
    DMatrix::from_fn(size, size, |j, k| if j >= k { g[j - k] } else { 0.0 })
}

/// Upper-triangular `T(exp(t a-))` on `rows x cols`.
fn upper_exp(phi: &LaurentSymbol, t: f64, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut h: Vec<f64> = (0..=phi.cutoff() as isize).map(|k| phi.get(-k)).collect();
    h[0] = 0.0;
    let g = analytic_exp(&h, t, rows.max(cols));
    DMatrix::from_fn(rows, cols, |j, k| if k >= j { g[k - j] } else { 0.0 })
}

/// The factors of `R(t, a) = e^{-t T(a+)} e^{t T(a)} e^{-t T(a-)}` on a
/// finite section, with `e^{t T(a)}` taken from a section padded by the
/// symbol cutoff so that its leading block matches the infinite operator.
#[derive(Debug, Clone)]
pub struct ExponentialFactors {
    pub t: f64,
    pub size: usize,
    pub padded: usize,
    /// Leading `size` block of `e^{t T(a)}`.
    pub exp_block: DMatrix<f64>,
    /// Leading `size` block of `R`.
    pub r_block: DMatrix<f64>,
    /// Leading `size` block of `R^-1 = e^{t T(a-)} e^{-t T(a)} e^{t T(a+)}`.
    pub r_inv_block: DMatrix<f64>,
    phi0: f64,
    hankel_trace: f64,
    sobolev_tail: f64,
}

impl ExponentialFactors {
    pub fn new(phi: &LaurentSymbol, t: f64, size: usize) -> Self {
        let padded = size + phi.cutoff();
        let big = toeplitz_block(phi, padded, padded);
        let e = (&big * t).exp();
        let e_inv = (&big * -t).exp();
        let exp_block = e.view((0, 0), (size, size)).into_owned();
        // triangular factors only couple the leading block to itself
        let r_block = lower_exp(phi, -t, size) * &exp_block * upper_exp(phi, -t, size, size);
        let left = upper_exp(phi, t, size, padded);
        let right = lower_exp(phi, t, padded);
        let r_inv_block = left * e_inv * right.view((0, 0), (padded, size));
        Self {
            t,
            size,
            padded,
            exp_block,
            r_block,
            r_inv_block,
            phi0: phi.get(0),
            hankel_trace: phi.hankel_trace(),
            sobolev_tail: phi.sobolev_tail(size),
        }
    }

    /// `exp(-(t^2 / 2) Tr [T(a+), T(a-)]) = exp((t^2 / 2) Tr H(a) H(a~))`.
    pub fn gaussian_factor(&self) -> f64 {
        (0.5 * self.t * self.t * self.hankel_trace).exp()
    }

    pub fn ehrhardt(&self) -> EhrhardtCheck {
        let lhs = det(&self.r_block);
        let rhs = self.gaussian_factor();
        EhrhardtCheck {
            lhs,
            rhs,
            residual: (lhs - rhs).abs(),
            allowance: rhs * self.t * self.t * self.sobolev_tail + 1e-13,
        }
    }

    pub fn determinant_identity(&self, n: usize) -> Result<DeterminantIdentity> {
        if n == 0 || n >= self.size {
            return Err(Error::invalid("n", format!("projection rank {n} must lie in [1, {})", self.size)));
        }
        let lhs = det(&self.exp_block.view((0, 0), (n, n)).into_owned()) * (-self.t * n as f64 * self.phi0).exp();
        let tick = det(&self.r_block.view((0, 0), (n, n)).into_owned());
        let rest = self.size - n;
        let remainder = self.r_inv_block.view((n, n), (rest, rest)).into_owned();
        let remainder_det = det(&remainder);
        let rhs = self.gaussian_factor() * remainder_det;
        Ok(DeterminantIdentity { lhs, tick, rhs, remainder_det })
    }
}

fn det(m: &DMatrix<f64>) -> f64 {
    let (s, l) = log_abs_det(m);
    s * l.exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EhrhardtCheck {
    /// `det e^{-A} e^{A+B} e^{-B}` on the section.
    pub lhs: f64,
    /// `e^{-(1/2) Tr [A, B]}`.
    pub rhs: f64,
    pub residual: f64,
    pub allowance: f64,
}

/// Ehrhardt's identity with `A = t T(a+)`, `B = t T(a-)`.
pub fn ehrhardt_check(phi: &LaurentSymbol, t: f64, size: usize) -> EhrhardtCheck {
    ExponentialFactors::new(phi, t, size).ehrhardt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterminantIdentity {
    /// `det(I + P_n (e^{t T(a)} - I) P_n) e^{-t Tr P_n T(a)}`.
    pub lhs: f64,
    /// `det(I + P_n (R - I) P_n)`.
    pub tick: f64,
    /// `e^{(t^2/2) Tr H(a) H(a~)} det(I + Q_n (R^-1 - I))`.
    pub rhs: f64,
    pub remainder_det: f64,
}

impl DeterminantIdentity {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs().max((self.lhs - self.tick).abs())
    }
}

/// Both sides of the Toeplitz determinant identity, with `Q_n` cut at `size`.
pub fn determinant_identity_check(phi: &LaurentSymbol, t: f64, n: usize, size: usize) -> Result<DeterminantIdentity> {
    ExponentialFactors::new(phi, t, size).determinant_identity(n)
}

/// `omega^|k| / (omega - 1/omega)`, the coefficients of `g_lambda`.
pub fn resolvent_symbol_coefficient(w: Complex64, k: isize) -> Complex64 {
    w.powu(k.unsigned_abs() as u32) / (w - w.inv())
}

/// `phi_k = (1/n^alpha) sum_j c_j Im(omega_j^|k| / (omega_j - 1/omega_j))` with
/// `omega_j = omega(x0 + eta_j / n^alpha)`, cut where the majorant falls below
/// [`SYMBOL_TOL`].
pub fn pole_symbol(x0: f64, eta: &[Complex64], c: &[f64], n: usize, alpha: f64) -> Result<LaurentSymbol> {
    if !(x0 > -2.0 && x0 < 2.0) {
        return Err(Error::invalid("x0", format!("{x0} must lie in the bulk (-2, 2)")));
    }
    if eta.is_empty() || eta.len() != c.len() {
        return Err(Error::invalid("f.c", "need one coefficient per pole"));
    }
    if eta.iter().any(|e| !(e.im > 0.0)) {
        return Err(Error::invalid("f.eta", "poles must lie in the upper half-plane"));
    }
    let scale = (n as f64).powf(alpha);
    let ws = eta.iter().map(|&e| omega(x0 + e / scale)).collect::<Result<Vec<_>>>()?;
    let amp: Vec<f64> = ws.iter().zip(c).map(|(w, cj)| cj.abs() / (w - w.inv()).norm() / scale).collect();
    let q = ws.iter().fold(0.0f64, |m, w| m.max(w.norm()));
    let total: f64 = amp.iter().sum();
    let cutoff = if total <= SYMBOL_TOL {
        0
    } else {
        (((SYMBOL_TOL / total).ln() / q.ln()).ceil() as usize).min(MAX_CUTOFF)
    };
    Ok(LaurentSymbol::from_fn(cutoff, |k| {
        let vals = ws.iter().zip(c).map(|(&w, cj)| cj * resolvent_symbol_coefficient(w, k).im);
        compensated_sum(vals) / scale
    }))
}

/// `Tr H(g_1) H(g~_2) / n^(2 alpha)` in closed form, where `g_i` is the
/// symbol of the free resolvent at `lambda_i`.
pub fn hankel_commutator_trace(lambda1: Complex64, lambda2: Complex64, n: usize, alpha: f64) -> Result<Complex64> {
    let w1 = omega(lambda1)?;
    let w2 = omega(lambda2)?;
    let q = w1 * w2;
    let scale = (n as f64).powf(2.0 * alpha);
    Ok(q / (1.0 - q).powu(2) / ((w1.inv() - w1) * (w2.inv() - w2)) / scale)
}

/// Closed-form `Tr H(phi) H(phi~)` for the pole symbol, expanding
/// `Im g = (g(lambda) - g(conj lambda)) / 2i`.
pub fn hankel_trace_closed(x0: f64, eta: &[Complex64], c: &[f64], n: usize, alpha: f64) -> Result<f64> {
    let scale = (n as f64).powf(alpha);
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &ei) in eta.iter().enumerate() {
        for (j, &ej) in eta.iter().enumerate() {
            let (li, lj) = (x0 + ei / scale, x0 + ej / scale);
            let s = hankel_commutator_trace(li, lj, n, alpha)? - hankel_commutator_trace(li, lj.conj(), n, alpha)?
                - hankel_commutator_trace(li.conj(), lj, n, alpha)?
                + hankel_commutator_trace(li.conj(), lj.conj(), n, alpha)?;
            acc += -0.25 * c[i] * c[j] * s;
        }
    }
    Ok(acc.re)
}

/// `-(1/2) sum_{i,j} c_i c_j Re (eta_i - conj eta_j)^-2`.
pub fn commutator_trace_limit(eta: &[Complex64], c: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (ei, ci) in eta.iter().zip(c) {
        for (ej, cj) in eta.iter().zip(c) {
            let d = ei - ej.conj();
            acc += ci * cj * (d * d).inv().re;
        }
    }
    -0.5 * acc
}
