//! Gauss rules generated from three-term recurrences.

use crate::error::Result;
use crate::linalg::tridiagonal_eigen_first_components;

/// Nodes and positive weights of a quadrature rule on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Golub–Welsch: the `m`-point Gauss rule of the probability measure whose
    /// orthonormal recurrence has off-diagonal `a` and diagonal `b`.
    pub fn gauss_from_recurrence(a: &[f64], b: &[f64], m: usize) -> Result<Self> {
        assert!(m >= 1 && b.len() >= m && a.len() + 1 >= m);
        let (nodes, first) = tridiagonal_eigen_first_components(&b[..m], &a[..m - 1])?;
        let weights = first.iter().map(|z| z * z).collect();
        Ok(Self { nodes, weights })
    }

    /// Gauss rule for the Jacobi weight `(1 - x)^g1 (1 + x)^g2`, normalized
    /// to unit mass.
    pub fn gauss_jacobi(g1: f64, g2: f64, m: usize) -> Result<Self> {
        let (a, b) = jacobi_recurrence(g1, g2, m);
        Self::gauss_from_recurrence(&a, &b, m)
    }

    /// Closed-form Gauss rule of the semicircle law on `[-2, 2]`.
    pub fn semicircle(m: usize) -> Self {
        let h = std::f64::consts::PI / (m as f64 + 1.0);
        let mut nodes = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for k in (1..=m).rev() {
            let th = k as f64 * h;
            nodes.push(2.0 * th.cos());
            weights.push(2.0 / (m as f64 + 1.0) * th.sin().powi(2));
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        crate::linalg::compensated_sum(self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)))
    }

    /// Affine image of the rule under `x -> lo + (hi - lo) (x + 1) / 2`,
    /// weights rescaled to integrate Lebesgue measure on `[lo, hi]`
    /// when the source rule is the unit-mass Legendre rule.
    pub fn mapped_legendre(&self, lo: f64, hi: f64) -> Self {
        let half = 0.5 * (hi - lo);
        Self {
            nodes: self.nodes.iter().map(|x| lo + half * (x + 1.0)).collect(),
            weights: self.weights.iter().map(|w| 2.0 * half * w).collect(),
        }
    }
}

/// Orthonormal recurrence coefficients `(a_1..a_m, b_1..b_m)` of the
/// Jacobi weight `(1 - x)^g1 (1 + x)^g2` on `[-1, 1]`.
pub fn jacobi_recurrence(g1: f64, g2: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let (al, be) = (g1, g2);
    let ab = al + be;
    let mut b = Vec::with_capacity(m);
    let mut a = Vec::with_capacity(m);
    for k in 0..m {
        let kf = k as f64;
        let bk = if k == 0 {
            (be - al) / (ab + 2.0)
        } else {
            (be * be - al * al) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        b.push(bk);
    }
    for k in 1..=m {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        let a2 = if k == 1 {
            4.0 * (1.0 + al) * (1.0 + be) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            4.0 * kf * (kf + al) * (kf + be) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        a.push(a2.sqrt());
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_closed_form() {
        let (a, b) = jacobi_recurrence(0.0, 0.0, 6);
        for (k, ak) in a.iter().enumerate() {
            let n = (k + 1) as f64;
            assert!((ak - n / (4.0 * n * n - 1.0).sqrt()).abs() < 1e-15);
        }
        assert!(b.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn chebyshev_second_kind_is_constant_half() {
        let (a, b) = jacobi_recurrence(0.5, 0.5, 8);
        assert!(a.iter().all(|x| (x - 0.5).abs() < 1e-15));
        assert!(b.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = QuadratureRule::gauss_jacobi(0.0, 0.0, 10).unwrap();
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // mean of x^18 under uniform measure on [-1, 1]
        let v = rule.integrate(|x| x.powi(18));
        assert!((v - 1.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn semicircle_rule_matches_golub_welsch() {
        let m = 40;
        let closed = QuadratureRule::semicircle(m);
        let gw = QuadratureRule::gauss_from_recurrence(&vec![1.0; m], &vec![0.0; m], m).unwrap();
        for i in 0..m {
            assert!((closed.nodes[i] - gw.nodes[i]).abs() < 1e-13);
            assert!((closed.weights[i] - gw.weights[i]).abs() < 1e-13);
        }
        // second moment of the semicircle is 1, fourth is 2
        assert!((closed.integrate(|x| x * x) - 1.0).abs() < 1e-13);
        assert!((closed.integrate(|x| x.powi(4)) - 2.0).abs() < 1e-13);
    }
}
