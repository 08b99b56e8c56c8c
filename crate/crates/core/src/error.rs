use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure mode of the geometric engine.
///
/// The variants are coarse on purpose: the scenario runner classifies
/// failures by variant (skipped sample vs. failed check vs. internal
/// inconsistency), so each one names a class of event rather than a site.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("domain error in `{subtree}`: {reason}")]
    Domain { subtree: String, reason: String },

    #[error("objects live on different charts (`{left}` vs `{right}`)")]
    ChartMismatch { left: String, right: String },

    #[error("degree {degree} exceeds chart dimension {dim}")]
    DegreeOverflow { degree: usize, dim: usize },

    #[error("unsupported multivector degrees ({0}, {1}) for the Schouten-Nijenhuis bracket")]
    UnsupportedDegree(usize, usize),

    #[error("invalid tensor index: {0}")]
    IndexOutOfRange(String),

    #[error("antisymmetry violation: {0}")]
    AntisymmetryViolation(String),

    #[error("flat map of the contact form is singular at this point")]
    SingularFlat,

    #[error("symplectic form is degenerate at this point")]
    SingularSymplectic,

    #[error("bivector is not invertible at this point")]
    SingularSharp,

    #[error("singular linear system")]
    SingularMatrix,

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("expected {expected} candidate integrals, got {got}")]
    WrongCount { expected: usize, got: usize },

    #[error("not homogeneous: {0}")]
    NotHomogeneous(String),

    #[error("eigenvalue tracking is ambiguous: {0}")]
    TrackingAmbiguity(String),

    #[error("eigenvalue solver failed: {0}")]
    EigenSolverFailure(String),

    #[error("ill-conditioned Jacobian (condition estimate {0:.3e})")]
    IllConditionedJacobian(f64),

    #[error("trajectory left the domain at t = {time}")]
    DomainExit {
        time: f64,
        trajectory: Box<crate::flows::Trajectory>,
    },

    #[error("only the trivial symplectisation with conformal factor r is supported (got `{0}`)")]
    UnsupportedConformalFactor(String),

    #[error("coordinate name collision: {0}")]
    NameCollision(String),

    #[error("rejection sampling exhausted after {attempts} attempts ({accepted} of {wanted} accepted)")]
    RejectionExhausted {
        attempts: usize,
        accepted: usize,
        wanted: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Failures tied to the evaluation point rather than to the inputs.
    /// Samples that raise one of these are recorded as skipped.
    pub fn is_pointwise(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::SingularFlat
                | Error::SingularSymplectic
                | Error::SingularSharp
                | Error::SingularMatrix
                | Error::TrackingAmbiguity(_)
                | Error::IllConditionedJacobian(_)
        )
    }

    /// Short stable class name, used in reports.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Parse(_) => "ParseError",
            Error::UnboundVariable(_) => "UnboundVariable",
            Error::Domain { .. } => "DomainError",
            Error::ChartMismatch { .. } => "ChartMismatch",
            Error::DegreeOverflow { .. } => "DegreeOverflow",
            Error::UnsupportedDegree(..) => "UnsupportedDegree",
            Error::IndexOutOfRange(_) => "IndexOutOfRange",
            Error::AntisymmetryViolation(_) => "AntisymmetryViolation",
            Error::SingularFlat => "SingularFlat",
            Error::SingularSymplectic => "SingularSymplectic",
            Error::SingularSharp => "SingularSharp",
            Error::SingularMatrix => "SingularMatrix",
            Error::InternalInconsistency(_) => "InternalInconsistency",
            Error::WrongCount { .. } => "WrongCount",
            Error::NotHomogeneous(_) => "NotHomogeneous",
            Error::TrackingAmbiguity(_) => "TrackingAmbiguity",
            Error::EigenSolverFailure(_) => "EigenSolverFailure",
            Error::IllConditionedJacobian(_) => "IllConditionedJacobian",
            Error::DomainExit { .. } => "DomainExit",
            Error::UnsupportedConformalFactor(_) => "UnsupportedConformalFactor",
            Error::NameCollision(_) => "NameCollision",
            Error::RejectionExhausted { .. } => "RejectionExhausted",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}
