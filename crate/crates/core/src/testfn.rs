//! Test functions for linear statistics.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A real function with a derivative, evaluable anywhere on the line.
pub trait RealFunction: Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

impl<F: RealFunction + ?Sized> RealFunction for &F {
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        (**self).derivative(x)
    }
}

/// `f(x) = sum_j c_j Im 1/(x - eta_j)` with every `Im eta_j > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleCombination {
    c: Vec<f64>,
    eta: Vec<Complex64>,
}

impl PoleCombination {
    pub fn new(c: Vec<f64>, eta: Vec<Complex64>) -> Result<Self> {
        if c.is_empty() || c.len() != eta.len() {
            return Err(Error::invalid("f.c", "need one coefficient per pole and at least one pole"));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("f.c", "coefficients must be finite"));
        }
        if eta.iter().any(|e| !(e.im > 0.0) || !e.re.is_finite() || !e.im.is_finite()) {
            return Err(Error::invalid("f.eta", "every pole needs a finite positive imaginary part"));
        }
        Ok(Self { c, eta })
    }

    /// `Im 1/(x - i)`.
    pub fn single() -> Self {
        Self { c: vec![1.0], eta: vec![Complex64::new(0.0, 1.0)] }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.eta
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// `sum |c_j| / Im eta_j`, an upper bound for the sup norm.
    pub fn sup_bound(&self) -> f64 {
        self.c.iter().zip(&self.eta).map(|(c, e)| c.abs() / e.im).sum()
    }

    /// Poisson smoothing at width `delta`: every pole moves up by `i delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        Self { c: self.c.clone(), eta: self.eta.iter().map(|e| e + Complex64::new(0.0, delta)).collect() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { c: self.c.iter().map(|c| c * s).collect(), eta: self.eta.clone() }
    }

    /// `x -> f(p x)` is again a pole combination with poles `eta / p` and
    /// coefficients `c / p`.
    pub fn dilated(&self, p: f64) -> Self {
        Self { c: self.c.iter().map(|c| c / p).collect(), eta: self.eta.iter().map(|e| e / p).collect() }
    }
}

impl RealFunction for PoleCombination {
    fn value(&self, x: f64) -> f64 {
        self.c.iter().zip(&self.eta).map(|(c, e)| c * e.im / (x - e).norm_sqr()).sum()
    }

    fn derivative(&self, x: f64) -> f64 {
        self.c
            .iter()
            .zip(&self.eta)
            .map(|(c, e)| {
                let d = Complex64::new(x, 0.0) - e;
                -c * (d * d).inv().im
            })
            .sum()
    }
}

/// A compactly supported C^1 function given by samples of value and
/// derivative, interpolated by cubic Hermite splines and zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledC1 {
    grid: Vec<f64>,
    values: Vec<f64>,
    derivatives: Vec<f64>,
    support: (f64, f64),
}

impl SampledC1 {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, derivatives: Vec<f64>, support: (f64, f64)) -> Result<Self> {
        if grid.len() < 2 || values.len() != grid.len() || derivatives.len() != grid.len() {
            return Err(Error::invalid("f.grid", "need at least two nodes with one value and derivative each"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("f.grid", "nodes must be finite and strictly increasing"));
        }
        if !(support.0 < support.1) {
            return Err(Error::invalid("f.support", "interval must be non-empty"));
        }
        for (i, &x) in grid.iter().enumerate() {
            if (x < support.0 || x > support.1) && (values[i] != 0.0 || derivatives[i] != 0.0) {
                return Err(Error::invalid("f.values", "samples outside the support must vanish"));
            }
        }
        Ok(Self { grid, values, derivatives, support })
    }

    /// Sample `f` and `df` on `grid`, zeroing nodes outside `support`.
    pub fn from_fn(grid: Vec<f64>, support: (f64, f64), f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Result<Self> {
        let inside = |x: f64| x >= support.0 && x <= support.1;
        let values = grid.iter().map(|&x| if inside(x) { f(x) } else { 0.0 }).collect();
        let derivatives = grid.iter().map(|&x| if inside(x) { df(x) } else { 0.0 }).collect();
        Self::new(grid, values, derivatives, support)
    }

    /// Uniform grid of `m` nodes on `[lo, hi]`.
    pub fn uniform_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
        let h = (hi - lo) / (m - 1) as f64;
        (0..m).map(|i| lo + h * i as f64).collect()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.derivatives
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn cell(&self, x: f64) -> Option<usize> {
        let (lo, hi) = (self.grid[0], *self.grid.last().unwrap());
        if x < lo || x > hi || x < self.support.0 || x > self.support.1 {
            return None;
        }
        let i = self.grid.partition_point(|&g| g <= x);
        Some(i.clamp(1, self.grid.len() - 1) - 1)
    }

    fn hermite(&self, i: usize, x: f64) -> (f64, f64) {
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.derivatives[i] * h, self.derivatives[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1;
        let dv = (6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1;
        (v, dv / h)
    }
}

impl RealFunction for SampledC1 {
    fn value(&self, x: f64) -> f64 {
        self.cell(x).map_or(0.0, |i| self.hermite(i, x).0)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.cell(x).map_or(0.0, |i| self.hermite(i, x).1)
    }
}

/// The test function `f` of a linear statistic.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    PoleCombination(PoleCombination),
    SampledC1(SampledC1),
}

impl TestFunction {
    /// An upper bound for `sup |f|`.
    pub fn sup_bound(&self) -> f64 {
        match self {
            TestFunction::PoleCombination(p) => p.sup_bound(),
            TestFunction::SampledC1(s) => s.sup_norm(),
        }
    }

    pub fn as_poles(&self) -> Option<&PoleCombination> {
        match self {
            TestFunction::PoleCombination(p) => Some(p),
            TestFunction::SampledC1(_) => None,
        }
    }
}

impl From<PoleCombination> for TestFunction {
    fn from(p: PoleCombination) -> Self {
        TestFunction::PoleCombination(p)
    }
}

impl From<SampledC1> for TestFunction {
    fn from(s: SampledC1) -> Self {
        TestFunction::SampledC1(s)
    }
}

impl RealFunction for TestFunction {
    fn value(&self, x: f64) -> f64 {
        match self {
            TestFunction::PoleCombination(p) => p.value(x),
            TestFunction::SampledC1(s) => s.value(x),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            TestFunction::PoleCombination(p) => p.derivative(x),
            TestFunction::SampledC1(s) => s.derivative(x),
        }
    }
}

/// `sum_k w_k f_k`, used to form differences of test functions.
pub struct LinearCombination<'a> {
    terms: Vec<(f64, &'a dyn RealFunction)>,
}

impl<'a> LinearCombination<'a> {
    pub fn new(terms: Vec<(f64, &'a dyn RealFunction)>) -> Self {
        Self { terms }
    }

    pub fn difference(f: &'a dyn RealFunction, g: &'a dyn RealFunction) -> Self {
        Self::new(vec![(1.0, f), (-1.0, g)])
    }
}

impl RealFunction for LinearCombination<'_> {
    fn value(&self, x: f64) -> f64 {
        self.terms.iter().map(|(w, f)| w * f.value(x)).sum()
    }

    fn derivative(&self, x: f64) -> f64 {
        self.terms.iter().map(|(w, f)| w * f.derivative(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pole_values() {
        let f = PoleCombination::single();
        assert!((f.value(0.0) - 1.0).abs() < 1e-15);
        assert!((f.value(1.0) - 0.5).abs() < 1e-15);
        // d/dx 1/(1+x^2) = -2x/(1+x^2)^2
        assert!((f.derivative(1.0) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn pole_validation_names_field() {
        let e = PoleCombination::new(vec![1.0], vec![Complex64::new(0.0, -1.0)]).unwrap_err();
        assert!(matches!(e, Error::InvalidInput { ref field, .. } if field == "f.eta"));
    }

    #[test]
    fn dilation_matches_rescaled_argument() {
        let f = PoleCombination::new(vec![0.7, -0.2], vec![Complex64::new(0.3, 0.5), Complex64::new(-1.0, 2.0)]).unwrap();
        let g = f.dilated(2.5);
        for x in [-3.0, -0.1, 0.4, 2.0] {
            assert!((g.value(x) - f.value(2.5 * x)).abs() < 1e-14);
        }
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let grid = SampledC1::uniform_grid(-1.0, 1.0, 7);
        let f = |x: f64| (1.0 - x * x) * (x + 0.3);
        let df = |x: f64| -2.0 * x * (x + 0.3) + (1.0 - x * x);
        let s = SampledC1::from_fn(grid, (-1.0, 1.0), f, df).unwrap();
        for x in [-0.95, -0.2, 0.0, 0.33, 0.99] {
            assert!((s.value(x) - f(x)).abs() < 1e-14);
            assert!((s.derivative(x) - df(x)).abs() < 1e-13);
        }
        assert_eq!(s.value(1.5), 0.0);
    }

    #[test]
    fn sampled_outside_support_must_vanish() {
        let r = SampledC1::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.0], vec![0.0; 3], (0.0, 1.0));
        assert!(r.is_err());
    }
}
