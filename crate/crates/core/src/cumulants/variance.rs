//! Variance of the resolvent statistic from three Green's-function entries.

use num_complex::Complex64;

use super::MesoscopicFrame;
use crate::error::{Error, Result};
use crate::operator::{GreenFunction, JacobiOperator};

/// `Var X_g` for `g(x) = 1/(x - i)` at the frame scale.
///
/// The Christoffel–Darboux formula reduces `Var X_g = ||Q g(J) P||_HS^2`
/// to a 2x2 determinant of `Im G` at `lambda_n = x0 + i / n^alpha`:
/// `a_n^2 (Im G_nn Im G_{n+1,n+1} - (Im G_{n,n+1})^2)`.
pub fn variance_cd(op: &JacobiOperator, frame: &MesoscopicFrame) -> Result<f64> {
    let n = frame.n;
    if n >= op.coeffs().len() {
        return Err(Error::InsufficientCoefficients { needed: n + 1, available: op.coeffs().len() });
    }
    let z = frame.spectral_point(Complex64::new(0.0, 1.0));
    let g = GreenFunction::new(op, &z, n + 1)?;
    let a = op.coeffs().a(n);
    let (d0, d1, off) = (g.entry(n, n).im, g.entry(n + 1, n + 1).im, g.entry(n, n + 1).im);
    Ok(a * a * (d0 * d1 - off * off))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::resolvent_window;

    #[test]
    fn matches_hilbert_schmidt_norm_of_the_corner() {
        let frame = MesoscopicFrame::new(0.3, 0.5, 40).unwrap();
        let op = JacobiOperator::free(4000);
        let z = frame.spectral_point(Complex64::new(0.0, 1.0));
        let w = resolvent_window(&op, &z, 41..=1200, 1..=40).unwrap();
        let hs: f64 = w.entries.iter().map(|v| v.norm_sqr()).sum();
        let expected = hs / frame.scale().powi(2);
        let v = variance_cd(&op, &frame).unwrap();
        assert!((v - expected).abs() < 1e-12 * expected.max(1.0), "{v} vs {expected}");
    }
}
