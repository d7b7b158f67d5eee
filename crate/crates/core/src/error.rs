use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IteError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("quadrature did not reach tolerance {tol:e} within {budget} subintervals (estimate {estimate:e})")]
    QuadratureFailure { tol: f64, budget: usize, estimate: f64 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("step size underflow at r = {r} (h = {h:e})")]
    StepUnderflow { r: f64, h: f64 },

    #[error("zero of the function on or near the contour at k = {re} + {im}i")]
    BoundaryZero { re: f64, im: f64 },

    #[error("winding {winding} persists at minimum box size in [{re_min}, {re_max}] x [{im_min}, {im_max}]")]
    Unresolved {
        winding: i64,
        re_min: f64,
        re_max: f64,
        im_min: f64,
        im_max: f64,
    },

    #[error("no convergence after {iterations} iterations from k0 = {re} + {im}i")]
    NoConvergence { iterations: usize, re: f64, im: f64 },

    #[error("degenerate profile: the determinant vanishes identically to within {floor:e} of its term scale")]
    DegenerateProfile { floor: f64 },

    #[error("|D(k)| / scale = {ratio:e} exceeds the eigenvalue acceptance threshold {threshold:e}")]
    NotAnEigenvalue { ratio: f64, threshold: f64 },

    #[error("zero set region does not cover the requested sector: {0}")]
    RegionTooSmall(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("real-axis sign changes ({bisection}) disagree with strip winding ({winding})")]
    StripMismatch { bisection: usize, winding: i64 },

    #[error("parse error: {0}")]
    ParseError(String),
}

pub type Result<T> = std::result::Result<T, IteError>;

impl IteError {
    /// Variant name, used as a machine-readable error kind.
    pub fn name(&self) -> &'static str {
        match self {
            IteError::InvalidProfile(_) => "InvalidProfile",
            IteError::QuadratureFailure { .. } => "QuadratureFailure",
            IteError::DomainError(_) => "DomainError",
            IteError::StepUnderflow { .. } => "StepUnderflow",
            IteError::BoundaryZero { .. } => "BoundaryZero",
            IteError::Unresolved { .. } => "Unresolved",
            IteError::NoConvergence { .. } => "NoConvergence",
            IteError::DegenerateProfile { .. } => "DegenerateProfile",
            IteError::NotAnEigenvalue { .. } => "NotAnEigenvalue",
            IteError::RegionTooSmall(_) => "RegionTooSmall",
            IteError::InsufficientData(_) => "InsufficientData",
            IteError::StripMismatch { .. } => "StripMismatch",
            IteError::ParseError(_) => "ParseError",
        }
    }

    /// True for errors caused by the inputs rather than by a numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            IteError::InvalidProfile(_)
                | IteError::DomainError(_)
                | IteError::RegionTooSmall(_)
                | IteError::InsufficientData(_)
                | IteError::ParseError(_)
        )
    }
}
