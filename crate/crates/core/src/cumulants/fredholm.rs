//! Fredholm-determinant oracle for the cumulant generating function.

use nalgebra::DMatrix;

use super::MesoscopicFrame;
use crate::error::{Error, Result};
use crate::linalg::log_abs_det;
use crate::measures::RecurrenceCoefficients;
use crate::quadrature::QuadratureRule;
use crate::testfn::{RealFunction, TestFunction};

/// Chebyshev nodes used to expand `t -> log E exp(t X)`.
pub const CHEBYSHEV_NODES: usize = 32;

/// `log det(1 + (e^{t f} - 1) K_n)` discretized on a Gauss rule of the
/// measure, with `K_n = Psi Psi^T` and `Psi_ij = sqrt(w_i) p_j(x_i)`.
#[derive(Debug, Clone)]
pub struct FredholmOracle {
    frame: MesoscopicFrame,
    psi: DMatrix<f64>,
    fvals: Vec<f64>,
    radius: f64,
}

impl FredholmOracle {
    pub fn new(coeffs: &RecurrenceCoefficients, frame: &MesoscopicFrame, f: &TestFunction, grid_size: usize) -> Result<Self> {
        let n = frame.n;
        if grid_size < n {
            return Err(Error::invalid("grid_size", format!("{grid_size} nodes cannot resolve rank {n}")));
        }
        if coeffs.len() < grid_size {
            return Err(Error::InsufficientCoefficients { needed: grid_size, available: coeffs.len() });
        }
        let rule = QuadratureRule::gauss_from_recurrence(coeffs.off_diagonal(), coeffs.diagonal(), grid_size)?;
        let mut psi = DMatrix::<f64>::zeros(grid_size, n);
        let mut p = vec![0.0; n];
        for (i, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            coeffs.eval_orthonormal(x, &mut p);
            let sw = w.sqrt();
            for j in 0..n {
                psi[(i, j)] = sw * p[j];
            }
        }
        let fvals = rule.nodes.iter().map(|&x| f.value(frame.local(x))).collect();
        let sup = f.sup_bound();
        let radius = if sup > 0.0 { 1.0 / (3.0 * sup) } else { f64::INFINITY };
        Ok(Self { frame: *frame, psi, fvals, radius })
    }

    /// Default grid of `max(10 n, 1000)` nodes.
    pub fn default_grid_size(n: usize) -> usize {
        (10 * n).max(1000)
    }

    pub fn frame(&self) -> &MesoscopicFrame {
        &self.frame
    }

    /// Admissible `|t|`, `1 / (3 sup|f|)`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn log_generating(&self, t: f64) -> Result<f64> {
        if !(t.abs() <= self.radius) {
            return Err(Error::RadiusExceeded { t, radius: self.radius });
        }
        let n = self.psi.ncols();
        let mut scaled = self.psi.clone();
        for (i, &fv) in self.fvals.iter().enumerate() {
            let d = (t * fv).exp_m1();
            scaled.row_mut(i).scale_mut(d);
        }
        let m = DMatrix::<f64>::identity(n, n) + self.psi.tr_mul(&scaled);
        if let Some(ch) = m.clone().cholesky() {
            let l = ch.l_dirty();
            return Ok(2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>());
        }
        let (sign, log) = log_abs_det(&m);
        if sign <= 0.0 {
            return Err(Error::Singular("Fredholm determinant"));
        }
        Ok(log)
    }

    /// Taylor coefficients `C_1..C_max_m` of `log E exp(t X)`, from a
    /// Chebyshev interpolant on `[-radius, radius]`.
    pub fn cumulants(&self, max_m: usize) -> Result<Vec<f64>> {
        let r = if self.radius.is_finite() { self.radius } else { 1.0 };
        let nodes = CHEBYSHEV_NODES;
        let theta: Vec<f64> = (0..nodes).map(|k| std::f64::consts::PI * (k as f64 + 0.5) / nodes as f64).collect();
        let g = theta.iter().map(|th| self.log_generating(r * th.cos())).collect::<Result<Vec<_>>>()?;
        let cheb: Vec<f64> = (0..nodes)
            .map(|j| {
                let s: f64 = g.iter().zip(&theta).map(|(gk, th)| gk * (j as f64 * th).cos()).sum();
                2.0 * s / nodes as f64
            })
            .collect();
        let mono = chebyshev_to_monomial(&cheb);
        Ok((1..=max_m).map(|m| mono.get(m).copied().unwrap_or(0.0) / r.powi(m as i32)).collect())
    }
}

/// Monomial coefficients of `c_0 / 2 + sum_{j >= 1} c_j T_j(s)`.
fn chebyshev_to_monomial(c: &[f64]) -> Vec<f64> {
    let len = c.len();
    let mut out = vec![0.0; len];
    let mut prev = vec![0.0; len];
    let mut cur = vec![0.0; len];
    prev[0] = 1.0;
    out[0] = 0.5 * c[0];
    if len > 1 {
        cur[1] = 1.0;
        out[1] += c[1];
    }
    for cj in c.iter().skip(2) {
        let mut next = vec![0.0; len];
        for k in 0..len {
            if k > 0 {
                next[k] += 2.0 * cur[k - 1];
            }
            next[k] -= prev[k];
        }
        for k in 0..len {
            out[k] += cj * next[k];
        }
        prev = cur;
        cur = next;
    }
    out
}

/// `log det(1 + (e^{t f} - 1) K_n)` on the default grid.
pub fn fredholm_log_generating(coeffs: &RecurrenceCoefficients, frame: &MesoscopicFrame, f: &TestFunction, t: f64) -> Result<f64> {
    let size = FredholmOracle::default_grid_size(frame.n).min(coeffs.len());
    FredholmOracle::new(coeffs, frame, f, size)?.log_generating(t)
}
