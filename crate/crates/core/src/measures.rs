//! Weight families and the recurrence coefficients of their orthonormal
//! polynomials.
//!
//! Coefficients follow the convention `x p_{n-1} = a_n p_n + b_n p_{n-1} +
//! a_{n-1} p_{n-2}`, so `a_n` couples rows `n` and `n + 1` of the Jacobi
//! matrix and `b_n` is its `n`-th diagonal entry (both 1-based). All measures
//! are normalized to unit mass, which leaves the coefficients unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::CompensatedSum;
use crate::quadrature::{jacobi_recurrence, QuadratureRule};

/// Floor below which a polynomial modification `h` counts as non-positive.
pub const WEIGHT_FLOOR: f64 = 1e-10;
const WEIGHT_CHECK_POINTS: usize = 10_000;
/// Base-rule nodes per requested coefficient in the Stieltjes procedure.
pub const STIELTJES_OVERSAMPLING: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    /// `h(x) (1 - x)^gamma1 (1 + x)^gamma2` on `[-1, 1]`; `h` holds
    /// polynomial coefficients in ascending order.
    ModifiedJacobi { gamma1: f64, gamma2: f64, h: Vec<f64> },
    /// Semicircle law centred at `center` with constant off-diagonal `a`,
    /// supported on `[center - 2a, center + 2a]`.
    FreeChebyshev { center: f64, a: f64 },
    Explicit { a: Vec<f64>, b: Vec<f64> },
    /// `a_n = 1 + amplitude xi_n n^-beta`, `b_n = amplitude xi'_n n^-beta`.
    PerturbedFree { beta: f64, amplitude: f64, seed: u64 },
}

impl WeightSpec {
    pub fn legendre() -> Self {
        WeightSpec::ModifiedJacobi { gamma1: 0.0, gamma2: 0.0, h: vec![1.0] }
    }

    pub fn free() -> Self {
        WeightSpec::FreeChebyshev { center: 0.0, a: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::ModifiedJacobi { gamma1, gamma2, h } => {
                for (name, g) in [("weight.gamma1", gamma1), ("weight.gamma2", gamma2)] {
                    if !g.is_finite() || *g <= -1.0 {
                        return Err(Error::invalid(name, format!("{g} must be finite and > -1")));
                    }
                }
                if h.is_empty() || h.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("weight.h", "needs at least one finite coefficient"));
                }
                for i in 0..WEIGHT_CHECK_POINTS {
                    let x = -1.0 + 2.0 * i as f64 / (WEIGHT_CHECK_POINTS - 1) as f64;
                    let v = horner(h, x);
                    if !(v >= WEIGHT_FLOOR) {
                        return Err(Error::NonPositiveWeight { x, value: v, floor: WEIGHT_FLOOR });
                    }
                }
                Ok(())
            }
            WeightSpec::FreeChebyshev { center, a } => {
                if !center.is_finite() {
                    return Err(Error::invalid("weight.center", "must be finite"));
                }
                if !a.is_finite() || *a <= 0.0 {
                    return Err(Error::invalid("weight.a", format!("{a} must be positive")));
                }
                Ok(())
            }
            WeightSpec::Explicit { a, b } => {
                if a.is_empty() || a.len() != b.len() {
                    return Err(Error::invalid(
                        "weight.a_seq",
                        format!("lengths {} and {} must agree and be non-zero", a.len(), b.len()),
                    ));
                }
                validate_sequences(a, b)
            }
            WeightSpec::PerturbedFree { beta, amplitude, .. } => {
                if !beta.is_finite() || *beta <= 0.0 || *beta > 1.0 {
                    return Err(Error::invalid("weight.beta", format!("{beta} must lie in (0, 1]")));
                }
                if !amplitude.is_finite() {
                    return Err(Error::invalid("weight.amplitude", "must be finite"));
                }
                Ok(())
            }
        }
    }

    /// A priori bound on `sup a_n`, available before any coefficient is
    /// generated.
    pub fn coefficient_bound(&self) -> f64 {
        match self {
            // support in [-1, 1] forces a_n <= 1
            WeightSpec::ModifiedJacobi { .. } => 1.0,
            WeightSpec::FreeChebyshev { a, .. } => *a,
            WeightSpec::Explicit { a, .. } => a.iter().cloned().fold(0.0, f64::max),
            WeightSpec::PerturbedFree { amplitude, .. } => 1.0 + amplitude.abs(),
        }
    }

    /// Limits `(a, b)` of the coefficient sequence when they are known in
    /// closed form.
    pub fn limits(&self) -> Option<(f64, f64)> {
        match self {
            WeightSpec::ModifiedJacobi { .. } => Some((0.5, 0.0)),
            WeightSpec::FreeChebyshev { center, a } => Some((*a, *center)),
            WeightSpec::PerturbedFree { .. } => Some((1.0, 0.0)),
            WeightSpec::Explicit { .. } => None,
        }
    }
}

fn validate_sequences(a: &[f64], b: &[f64]) -> Result<()> {
    if let Some((i, x)) = a.iter().enumerate().find(|(_, x)| !x.is_finite() || **x <= 0.0) {
        return Err(Error::invalid("a", format!("a_{} = {x} must be positive", i + 1)));
    }
    if let Some((i, x)) = b.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::invalid("b", format!("b_{} = {x} must be finite", i + 1)));
    }
    Ok(())
}

pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Jacobi-matrix entries `a_1..a_N` and `b_1..b_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceCoefficients {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl RecurrenceCoefficients {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::invalid("coefficients", "a and b need equal non-zero length"));
        }
        validate_sequences(&a, &b)?;
        Ok(Self { a, b })
    }

    pub fn free(n: usize) -> Self {
        Self { a: vec![1.0; n], b: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `a_n`, 1-based.
    pub fn a(&self, n: usize) -> f64 {
        self.a[n - 1]
    }

    /// `b_n`, 1-based.
    pub fn b(&self, n: usize) -> f64 {
        self.b[n - 1]
    }

    pub fn off_diagonal(&self) -> &[f64] {
        &self.a
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.b
    }

    pub fn sup_a(&self) -> f64 {
        self.a.iter().cloned().fold(0.0, f64::max)
    }

    pub fn sup_abs_b(&self) -> f64 {
        self.b.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.len() {
            return Err(Error::InsufficientCoefficients { needed: n, available: self.len() });
        }
        Ok(Self { a: self.a[..n].to_vec(), b: self.b[..n].to_vec() })
    }

    /// Coefficients of the push-forward of the measure under
    /// `x -> (x - center) / scale`.
    pub fn rescaled(&self, center: f64, scale: f64) -> Self {
        Self {
            a: self.a.iter().map(|x| x / scale).collect(),
            b: self.b.iter().map(|x| (x - center) / scale).collect(),
        }
    }

    /// Orthonormal polynomials `p_0..p_{n-1}` at `x`, written into `out`.
    pub fn eval_orthonormal(&self, x: f64, out: &mut [f64]) {
        let n = out.len();
        if n == 0 {
            return;
        }
        assert!(n <= self.len() + 1);
        out[0] = 1.0;
        if n > 1 {
            out[1] = (x - self.b[0]) / self.a[0];
        }
        for j in 2..n {
            out[j] = ((x - self.b[j - 1]) * out[j - 1] - self.a[j - 2] * out[j - 2]) / self.a[j - 1];
        }
    }
}

/// Coefficients `a_1..a_N`, `b_1..b_N` for `spec`.
pub fn generate_recurrence(spec: &WeightSpec, n: usize) -> Result<RecurrenceCoefficients> {
    generate_recurrence_with_base(spec, n, STIELTJES_OVERSAMPLING * n)
}

/// As [`generate_recurrence`], with an explicit base-rule size for weights
/// that go through the Stieltjes procedure.
pub fn generate_recurrence_with_base(
    spec: &WeightSpec,
    n: usize,
    base_nodes: usize,
) -> Result<RecurrenceCoefficients> {
    if n == 0 {
        return Err(Error::invalid("n", "at least one coefficient is required"));
    }
    spec.validate()?;
    match spec {
        WeightSpec::ModifiedJacobi { gamma1, gamma2, h } => {
            if h[1..].iter().all(|c| *c == 0.0) {
                let (a, b) = jacobi_recurrence(*gamma1, *gamma2, n);
                return RecurrenceCoefficients::new(a, b);
            }
            if base_nodes <= n {
                return Err(Error::invalid("base_nodes", "base rule must exceed the requested degree"));
            }
            let mut rule = QuadratureRule::gauss_jacobi(*gamma1, *gamma2, base_nodes)?;
            for (w, x) in rule.weights.iter_mut().zip(&rule.nodes) {
                *w *= horner(h, *x);
            }
            stieltjes(&rule, n)
        }
        WeightSpec::FreeChebyshev { center, a } => {
            RecurrenceCoefficients::new(vec![*a; n], vec![*center; n])
        }
        WeightSpec::Explicit { a, b } => {
            if n > a.len() {
                return Err(Error::InsufficientCoefficients { needed: n, available: a.len() });
            }
            RecurrenceCoefficients::new(a[..n].to_vec(), b[..n].to_vec())
        }
        WeightSpec::PerturbedFree { beta, amplitude, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut a = Vec::with_capacity(n);
            let mut b = Vec::with_capacity(n);
            for k in 1..=n {
                let damp = amplitude * (k as f64).powf(-beta);
                let xi: f64 = rng.random_range(-1.0..=1.0);
                let xi2: f64 = rng.random_range(-1.0..=1.0);
                let ak = 1.0 + damp * xi;
                if ak <= 0.0 {
                    return Err(Error::invalid(
                        "weight.amplitude",
                        format!("a_{k} = {ak} is not positive"),
                    ));
                }
                a.push(ak);
                b.push(damp * xi2);
            }
            RecurrenceCoefficients::new(a, b)
        }
    }
}

/// Discretized Stieltjes procedure on the measure `sum_i w_i delta_{x_i}`,
/// carried out with orthonormal (not monic) polynomials.
pub fn stieltjes(rule: &QuadratureRule, n: usize) -> Result<RecurrenceCoefficients> {
    let m = rule.len();
    if n >= m {
        return Err(Error::invalid("n", format!("{n} coefficients need more than {m} nodes")));
    }
    let mass: f64 = rule.weights.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::QuadratureUnderresolved { degree: 0, norm: mass });
    }
    let w: Vec<f64> = rule.weights.iter().map(|x| x / mass).collect();
    let x = &rule.nodes;
    let mut prev = vec![0.0; m];
    let mut cur = vec![1.0; m];
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut a_prev = 0.0;
    for k in 0..n {
        let mut bsum = CompensatedSum::new();
        for i in 0..m {
            bsum.add(w[i] * x[i] * cur[i] * cur[i]);
        }
        let bk = bsum.value();
        let mut next = vec![0.0; m];
        let mut nsum = CompensatedSum::new();
        for i in 0..m {
            next[i] = (x[i] - bk) * cur[i] - a_prev * prev[i];
            nsum.add(w[i] * next[i] * next[i]);
        }
        let norm2 = nsum.value();
        // an orthonormal step should leave a residual of order one
        if !(norm2 > 1e-28) {
            return Err(Error::QuadratureUnderresolved { degree: k + 1, norm: norm2 });
        }
        let ak = norm2.sqrt();
        for v in next.iter_mut() {
            *v /= ak;
        }
        a.push(ak);
        b.push(bk);
        a_prev = ak;
        prev = std::mem::replace(&mut cur, next);
    }
    RecurrenceCoefficients::new(a, b)
}

/// Outcome of [`fit_decay_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayFit {
    /// Tail deviations vanish to working precision.
    ExactMatch,
    /// `max(|a_n - a|, |b_n - b|) ~ constant * n^-beta`.
    PowerLaw { beta: f64, constant: f64 },
}

impl DecayFit {
    /// Exponent, with `+inf` for an exact match.
    pub fn beta_hat(&self) -> f64 {
        match self {
            DecayFit::ExactMatch => f64::INFINITY,
            DecayFit::PowerLaw { beta, .. } => *beta,
        }
    }
}

/// Log-log least squares of the deviation from `limits` over the tail half.
pub fn fit_decay_rate(coeffs: &RecurrenceCoefficients, limits: (f64, f64)) -> Result<DecayFit> {
    let devs: Vec<f64> = (1..=coeffs.len())
        .map(|k| (coeffs.a(k) - limits.0).abs().max((coeffs.b(k) - limits.1).abs()))
        .collect();
    fit_tail_decay(&devs)
}

/// Power-law fit of `deviations[k - 1] ~ C k^-beta` over the tail half.
pub fn fit_tail_decay(deviations: &[f64]) -> Result<DecayFit> {
    let n = deviations.len();
    if n < 50 {
        return Err(Error::TooFewCoefficients(n));
    }
    let points: Vec<(f64, f64)> = ((n + 1) / 2..=n).map(|k| (k as f64, deviations[k - 1])).collect();
    let max_dev = points.iter().fold(0.0f64, |m, p| m.max(p.1));
    if max_dev < 1e-14 {
        return Ok(DecayFit::ExactMatch);
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    let cnt = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / cnt;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / cnt;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit::PowerLaw { beta: -slope, constant: (my - slope * mx).exp() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_coefficients_are_constant() {
        let c = generate_recurrence(&WeightSpec::FreeChebyshev { center: 0.0, a: 1.0 }, 10).unwrap();
        assert!(c.off_diagonal().iter().all(|&x| x == 1.0));
        assert!(c.diagonal().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn legendre_first_coefficients() {
        let c = generate_recurrence(&WeightSpec::legendre(), 3).unwrap();
        assert!((c.a(1) - 0.5773502691896258).abs() < 1e-15);
        assert!((c.a(2) - 0.5163977794943222).abs() < 1e-15);
        assert!(c.diagonal().iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn even_modification_keeps_diagonal_at_center() {
        let spec = WeightSpec::ModifiedJacobi { gamma1: 0.3, gamma2: 0.3, h: vec![2.0, 0.0, 1.0] };
        let c = generate_recurrence(&spec, 40).unwrap();
        assert!(c.sup_abs_b() < 1e-12, "{}", c.sup_abs_b());
    }

    #[test]
    fn rejects_weight_with_zero() {
        let spec = WeightSpec::ModifiedJacobi { gamma1: 0.0, gamma2: 0.0, h: vec![0.0, 1.0] };
        assert!(matches!(generate_recurrence(&spec, 5), Err(Error::NonPositiveWeight { .. })));
    }

    #[test]
    fn rejects_bad_exponents() {
        let spec = WeightSpec::ModifiedJacobi { gamma1: -1.0, gamma2: 0.0, h: vec![1.0] };
        match generate_recurrence(&spec, 5) {
            Err(Error::InvalidInput { field, .. }) => assert_eq!(field, "weight.gamma1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn perturbed_free_is_seeded_and_prefix_stable() {
        let spec = WeightSpec::PerturbedFree { beta: 0.8, amplitude: 0.5, seed: 7 };
        let short = generate_recurrence(&spec, 20).unwrap();
        let long = generate_recurrence(&spec, 60).unwrap();
        assert_eq!(short.off_diagonal(), &long.off_diagonal()[..20]);
        assert_eq!(short.diagonal(), &long.diagonal()[..20]);
        let other = generate_recurrence(&WeightSpec::PerturbedFree { beta: 0.8, amplitude: 0.5, seed: 8 }, 20)
            .unwrap();
        assert_ne!(short, other);
    }

    #[test]
    fn perturbed_free_rejects_large_amplitude() {
        let spec = WeightSpec::PerturbedFree { beta: 1.0, amplitude: 50.0, seed: 1 };
        assert!(generate_recurrence(&spec, 200).is_err());
    }

    #[test]
    fn explicit_needs_enough_terms() {
        let spec = WeightSpec::Explicit { a: vec![1.0; 3], b: vec![0.0; 3] };
        assert!(matches!(
            generate_recurrence(&spec, 4),
            Err(Error::InsufficientCoefficients { needed: 4, available: 3 })
        ));
    }

    #[test]
    fn decay_fit_free_is_exact() {
        let c = RecurrenceCoefficients::free(100);
        assert_eq!(fit_decay_rate(&c, (1.0, 0.0)).unwrap(), DecayFit::ExactMatch);
        assert!(fit_decay_rate(&RecurrenceCoefficients::free(49), (1.0, 0.0)).is_err());
    }

    #[test]
    fn decay_fit_legendre_is_quadratic() {
        let c = generate_recurrence(&WeightSpec::legendre(), 400).unwrap();
        let beta = fit_decay_rate(&c, (0.5, 0.0)).unwrap().beta_hat();
        assert!((beta - 2.0).abs() < 0.02, "{beta}");
    }

    #[test]
    fn rescaling_maps_legendre_to_unit_limit() {
        let c = generate_recurrence(&WeightSpec::legendre(), 2000).unwrap().rescaled(0.0, 0.5);
        assert!((c.a(2000) - 1.0).abs() < 1e-7);
    }
}
