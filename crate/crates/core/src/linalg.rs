//! Small dense and banded kernels shared by the numerical modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// LU factorization with partial pivoting of a complex tridiagonal matrix.
///
/// Storage follows the LAPACK `gttrf` layout: after elimination `U` has a
/// main diagonal, one superdiagonal and a second superdiagonal created by
/// row interchanges.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<Complex64>,
    diag: Vec<Complex64>,
    upper: Vec<Complex64>,
    upper2: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    /// Factor the matrix with subdiagonal `sub`, diagonal `diag` and
    /// superdiagonal `sup` (`sub.len() == sup.len() == diag.len() - 1`).
    pub fn factor(sub: &[Complex64], diag: &[Complex64], sup: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        assert!(n >= 1 && sub.len() + 1 == n && sup.len() + 1 == n);
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![Complex64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n.saturating_sub(1) {
            if d[i].norm_sqr() >= dl[i].norm_sqr() {
                if d[i] == Complex64::new(0.0, 0.0) {
                    return Err(Error::Singular("tridiagonal LU"));
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == Complex64::new(0.0, 0.0) {
            return Err(Error::Singular("tridiagonal LU"));
        }
        Ok(Self {
            lower: dl,
            diag: d,
            upper: du,
            upper2: du2,
            swapped,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Overwrite `rhs` with the solution of `A x = rhs`.
    pub fn solve_in_place(&self, rhs: &mut [Complex64]) {
        let n = self.dim();
        assert_eq!(rhs.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = rhs[i];
                rhs[i] = rhs[i + 1];
                rhs[i + 1] = temp - self.lower[i] * rhs[i];
            } else {
                let t = self.lower[i] * rhs[i];
                rhs[i + 1] -= t;
            }
        }
        rhs[n - 1] /= self.diag[n - 1];
        if n >= 2 {
            rhs[n - 2] = (rhs[n - 2] - self.upper[n - 2] * rhs[n - 1]) / self.diag[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1] - self.upper2[i] * rhs[i + 2])
                / self.diag[i];
        }
    }
}

/// Eigenvalues and first eigenvector components of a symmetric tridiagonal
/// matrix, by the implicit QL method with Wilkinson shifts.
///
/// `diag` has length `n`, `off[i]` couples rows `i` and `i + 1`. The returned
/// pairs are sorted by eigenvalue.
pub fn tridiagonal_eigen_first_components(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    assert!(off.len() + 1 >= n);
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    let mut z = vec![0.0; n];
    if n > 0 {
        z[0] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::EigenNoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    Ok((
        order.iter().map(|&i| d[i]).collect(),
        order.iter().map(|&i| z[i]).collect(),
    ))
}

/// `(sign, ln|det|)` of a real square matrix via LU with partial pivoting.
pub fn log_abs_det(m: &DMatrix<f64>) -> (f64, f64) {
    assert!(m.is_square());
    if m.nrows() == 0 {
        return (1.0, 0.0);
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let mut sign = lu.p().determinant::<f64>();
    let mut log = CompensatedSum::new();
    for i in 0..u.nrows() {
        let x = u[(i, i)];
        if x == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if x < 0.0 {
            sign = -sign;
        }
        log.add(x.abs().ln());
    }
    (sign, log.value())
}

/// Determinant evaluated through [`log_abs_det`].
pub fn det(m: &DMatrix<f64>) -> f64 {
    let (s, l) = log_abs_det(m);
    s * l.exp()
}

/// Nuclear norm of a symmetric matrix (sum of absolute eigenvalues).
pub fn symmetric_trace_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = m.clone().symmetric_eigenvalues();
    compensated_sum(eig.iter().map(|x| x.abs()))
}

/// Nuclear norm of a general matrix via singular values.
pub fn trace_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let sv = m.clone().singular_values();
    compensated_sum(sv.iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn tridiagonal_solve_matches_dense() {
        let n = 7;
        let sub: Vec<_> = (0..n - 1).map(|i| c(1.0 + i as f64, 0.3)).collect();
        let sup: Vec<_> = (0..n - 1).map(|i| c(0.5, -(i as f64))).collect();
        let diag: Vec<_> = (0..n).map(|i| c(0.01 * i as f64, 0.2)).collect();
        let lu = TridiagonalLu::factor(&sub, &diag, &sup).unwrap();
        let mut dense = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] = diag[i];
            if i + 1 < n {
                dense[(i + 1, i)] = sub[i];
                dense[(i, i + 1)] = sup[i];
            }
        }
        let rhs: Vec<_> = (0..n).map(|i| c(i as f64, 1.0)).collect();
        let mut x = rhs.clone();
        lu.solve_in_place(&mut x);
        for i in 0..n {
            let mut acc = c(0.0, 0.0);
            for j in 0..n {
                acc += dense[(i, j)] * x[j];
            }
            assert!((acc - rhs[i]).norm() < 1e-12, "row {i}");
        }
    }

    #[test]
    fn single_entry_tridiagonal() {
        let lu = TridiagonalLu::factor(&[], &[c(2.0, 1.0)], &[]).unwrap();
        let mut x = vec![c(5.0, 0.0)];
        lu.solve_in_place(&mut x);
        assert!((x[0] - c(2.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn ql_matches_dense_eigen() {
        let diag = [0.3, -1.0, 2.0, 0.0, 0.5];
        let off = [1.0, 0.25, 0.7, 0.1];
        let (vals, first) = tridiagonal_eigen_first_components(&diag, &off).unwrap();
        let mut m = DMatrix::<f64>::zeros(5, 5);
        for i in 0..5 {
            m[(i, i)] = diag[i];
            if i < 4 {
                m[(i, i + 1)] = off[i];
                m[(i + 1, i)] = off[i];
            }
        }
        let eig = m.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..5)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for k in 0..5 {
            assert!((vals[k] - pairs[k].0).abs() < 1e-13);
            assert!((first[k].powi(2) - pairs[k].1).abs() < 1e-13);
        }
    }

    #[test]
    fn log_det_tracks_sign() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 3.0, 0.0]);
        let (s, l) = log_abs_det(&m);
        assert_eq!(s, -1.0);
        assert!((l - 6f64.ln()).abs() < 1e-15);
    }
}
