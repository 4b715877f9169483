use thiserror::Error;

/// Failures surfaced by the numerical routines.
///
/// Variants fall in two groups: input validation (`InvalidInput`,
/// `NonPositiveWeight`, `RadiusExceeded`, `OrderTooLarge`) and numerical
/// breakdown (everything else). [`Error::is_validation`] tells them apart.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidInput { field: String, reason: String },

    #[error("weight is not positive: h({x}) = {value} is below the floor {floor}")]
    NonPositiveWeight { x: f64, value: f64, floor: f64 },

    #[error("Stieltjes inner products lost positivity at degree {degree} (norm {norm})")]
    QuadratureUnderresolved { degree: usize, norm: f64 },

    #[error("recurrence has only {available} coefficients but {needed} are required")]
    InsufficientCoefficients { needed: usize, available: usize },

    #[error("decay fit needs at least 50 coefficients, got {0}")]
    TooFewCoefficients(usize),

    #[error("spectral shift is too close to the real axis (Im = {0:e})")]
    NearRealShift(f64),

    #[error("{required} rows are required but the cap is {cap}")]
    BufferOverflow { required: usize, cap: usize },

    #[error("point {re} + {im}i lies on the cut [-2, 2]")]
    OnCut { re: f64, im: f64 },

    #[error("decay bound violated at ({row}, {col}): ratio {ratio}")]
    ViolationFound { row: usize, col: usize, ratio: f64 },

    #[error("cumulant order {0} exceeds the supported maximum of 8")]
    OrderTooLarge(usize),

    #[error("trace reality check failed: imaginary residue {0:e}")]
    ComplexTrace(f64),

    #[error("|t| = {t} exceeds the admissible radius {radius}")]
    RadiusExceeded { t: f64, radius: f64 },

    #[error("quadrature did not converge: last change {change:e} above tolerance {tol:e}")]
    QuadratureNotConverged { change: f64, tol: f64 },

    #[error("normal equations are ill-conditioned (condition {0:e})")]
    IllConditioned(f64),

    #[error("grid too coarse: orthonormality residual {0:e}")]
    GridTooCoarse(f64),

    #[error("kernel numerically rank deficient: rank {rank} < {n}")]
    RankDeficient { rank: usize, n: usize },

    #[error("eigenvalue iteration failed to converge")]
    EigenNoConvergence,

    #[error("singular matrix in {0}")]
    Singular(&'static str),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the caller's inputs rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput { .. }
                | Error::NonPositiveWeight { .. }
                | Error::RadiusExceeded { .. }
                | Error::OrderTooLarge(_)
                | Error::TooFewCoefficients(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
