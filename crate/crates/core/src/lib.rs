//! Mesoscopic fluctuations of orthogonal polynomial ensembles.
//!
//! Cumulants of linear statistics `sum_j f(n^alpha (x_j - x0))` are computed
//! from resolvents of the Jacobi operator, cross-checked against a Fredholm
//! determinant, free Toeplitz closed forms and Monte Carlo sampling.

pub mod cumulants;
pub mod error;
pub mod funcspace;
pub mod linalg;
pub mod measures;
pub mod operator;
pub mod quadrature;
pub mod sampler;
pub mod testfn;
pub mod toeplitz;

pub use cumulants::{
    compute_cumulants, cumulant_difference, variance_cd, CompareOptions, CumulantDifference, CumulantReport,
    FredholmOracle, MesoscopicFrame, ProjectionSpec, SymbolMatrix,
};
pub use error::{Error, Result};
pub use funcspace::{
    fit_best, fit_resolvent_combination, lw_norm_estimate, poisson_smooth, sigma_poles_closed, sigma_quadrature,
    ResolventFit, WeightedLipschitzEstimate,
};
pub use measures::{generate_recurrence, DecayFit, RecurrenceCoefficients, WeightSpec};
pub use operator::{
    certify_combes_thomas, omega, resolvent_window, CertificationReport, GreenFunction, JacobiOperator,
    ResolventWindow, SpectralPoint,
};
pub use sampler::{
    cd_kernel, empirical_cumulants, sample_dpp, EmpiricalCumulants, ProjectionKernel, QuadratureGrid, SampleBatch,
};
pub use testfn::{LinearCombination, PoleCombination, RealFunction, SampledC1, TestFunction};
pub use toeplitz::{
    commutator_trace_limit, determinant_identity_check, ehrhardt_check, hankel_commutator_trace, pole_symbol,
    product_identity_check, LaurentSymbol, StructuredMatrix,
};
