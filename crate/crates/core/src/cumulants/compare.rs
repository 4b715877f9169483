//! Comparison of cumulants between two ensembles at the same frame.

use super::{band_width, cumulant, poles_of, symbol_window, MesoscopicFrame, ProjectionSpec};
use crate::error::{Error, Result};
use crate::linalg::symmetric_trace_norm;
use crate::measures::{fit_tail_decay, DecayFit};
use crate::operator::JacobiOperator;
use crate::testfn::TestFunction;

/// Largest diagnostic block for which the trace norm is evaluated.
pub const DEFAULT_TRACE_NORM_ROWS: usize = 1500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    /// Exponent of the diagnostic window; defaults to the midpoint of
    /// `alpha` and the measured decay exponent of `a - b`.
    pub beta: Option<f64>,
    pub trace_norm_rows: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { beta: None, trace_norm_rows: DEFAULT_TRACE_NORM_ROWS }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulantDifference {
    pub m: usize,
    pub value_a: f64,
    pub value_b: f64,
    pub diff: f64,
    pub beta: f64,
    /// `||P_w (F_a - F_b) P_w||_1` on the window of half-width `2 m n^beta`,
    /// or `None` when that block exceeds the configured size.
    pub trace_norm_diag: Option<f64>,
    pub window: (usize, usize),
}

/// Measured exponent of `max(|a_n - a'_n|, |b_n - b'_n|)`.
pub fn relative_decay(op_a: &JacobiOperator, op_b: &JacobiOperator) -> Result<DecayFit> {
    let len = op_a.dim().min(op_b.dim());
    let (ca, cb) = (op_a.coeffs(), op_b.coeffs());
    let devs: Vec<f64> = (1..=len)
        .map(|k| (ca.a(k) - cb.a(k)).abs().max((ca.b(k) - cb.b(k)).abs()))
        .collect();
    fit_tail_decay(&devs)
}

fn default_beta(alpha: f64, beta_hat: f64) -> f64 {
    let margin = 0.05 * (1.0 - alpha);
    (0.5 * (alpha + beta_hat)).clamp(alpha + margin, 1.0 - margin)
}

/// `|C_m(a) - C_m(b)|` at `frame` together with the trace-norm diagnostic.
pub fn cumulant_difference(
    op_a: &JacobiOperator,
    op_b: &JacobiOperator,
    frame: &MesoscopicFrame,
    f: &TestFunction,
    m: usize,
    options: CompareOptions,
) -> Result<CumulantDifference> {
    let poles = poles_of(f)?;
    let w = band_width(frame, &poles, op_a.tail_limits())?.max(band_width(frame, &poles, op_b.tail_limits())?);
    let first = if frame.n > w { frame.n - w + 1 } else { 1 };
    let rows = first..=frame.n + w;
    let fa = symbol_window(op_a, frame, &poles, rows.clone(), w)?;
    let fb = symbol_window(op_b, frame, &poles, rows, w)?;
    let p = ProjectionSpec::new(frame.n);
    let value_a = cumulant(&fa, &p, m)?;
    let value_b = cumulant(&fb, &p, m)?;

    let beta = match options.beta {
        Some(b) if b > frame.alpha && b < 1.0 => b,
        Some(b) => return Err(Error::invalid("compare.beta", format!("{b} must lie in (alpha, 1)"))),
        None => {
            let beta_hat = relative_decay(op_a, op_b).map(|d| d.beta_hat()).unwrap_or(f64::INFINITY);
            default_beta(frame.alpha, beta_hat)
        }
    };
    let half = (2.0 * m as f64 * (frame.n as f64).powf(beta)).ceil() as usize;
    let lo = frame.n.saturating_sub(half).max(fa.first());
    let hi = (frame.n + half).min(fa.last());
    let size = hi - lo + 1;
    let trace_norm_diag = if size <= options.trace_norm_rows {
        let off = lo - fa.first();
        let d = fa.data().view((off, off), (size, size)) - fb.data().view((off, off), (size, size));
        Some(symmetric_trace_norm(&d))
    } else {
        log::warn!("trace-norm diagnostic skipped: {size} rows exceed {}", options.trace_norm_rows);
        None
    };
    Ok(CumulantDifference { m, value_a, value_b, diff: (value_a - value_b).abs(), beta, trace_norm_diag, window: (lo, hi) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulants::operator_dimension;
    use crate::testfn::PoleCombination;

    #[test]
    fn identical_operators_differ_by_zero() {
        let frame = MesoscopicFrame::new(0.0, 0.4, 100).unwrap();
        let f = PoleCombination::single();
        let dim = operator_dimension(&frame, &f, (1.0, 0.0), 1.0).unwrap();
        let op = JacobiOperator::free(dim);
        let d = cumulant_difference(&op, &op, &frame, &f.into(), 2, CompareOptions::default()).unwrap();
        assert_eq!(d.diff, 0.0);
        assert_eq!(d.trace_norm_diag, Some(0.0));
        assert!(d.beta > 0.4 && d.beta < 1.0);
    }

    #[test]
    fn beta_default_is_clamped() {
        assert!((default_beta(0.5, f64::INFINITY) - 0.975).abs() < 1e-12);
        assert!((default_beta(0.5, 0.8) - 0.65).abs() < 1e-12);
        assert!((default_beta(0.5, 0.4) - 0.525).abs() < 1e-12);
    }
}
