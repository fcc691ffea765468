use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("measure space must have at least one atom")]
    EmptySpace,
    #[error("weight {index} is {value}, expected a positive finite number")]
    InvalidWeight { index: usize, value: f64 },
    #[error("exponent p = {0} is outside [1, inf]")]
    InvalidExponent(f64),
    #[error("bound at atom {index}: {reason}")]
    InvalidBound { index: usize, reason: String },
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("{0}: non-finite data")]
    NotFinite(String),
    #[error("void problem: lower bound exceeds upper bound at atom {atom}")]
    VoidProblem { atom: usize },
    #[error("point violates the box constraints at atom {atom}")]
    NotInBox { atom: usize },
    #[error("point is infeasible: {0}")]
    Infeasible(String),
    #[error("the polyhedron cut out by the linear constraints is empty")]
    EmptyPolyhedron,
    #[error("inconsistent equalities: equality {index} contradicts the others (residual {residual:e})")]
    InconsistentEqualities {
        index: usize,
        residual: f64,
        certificate: Vec<f64>,
    },
    #[error("bounds coincide at atom {atom}; strictly interior points cannot exist")]
    DegenerateBounds { atom: usize },
    #[error("sign condition violated at atom {atom}: {reason}")]
    SignViolation { atom: usize, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("gradient of nonlinear constraint {constraint} disagrees with finite differences (relative error {relative_error:e})")]
    GradientCheckFailed {
        constraint: usize,
        relative_error: f64,
    },
    #[error("could not construct a Slater point: {0}")]
    ConstructionFailed(String),
    #[error("no dual certificate found ({0}); this indicates a tolerance failure, not a Slater point")]
    CertificateNotFound(String),
    #[error("support of the certificate is empty")]
    EmptySupport,
    #[error("unknown refinement model '{0}'")]
    UnknownModel(String),
    #[error("{field}: {message}")]
    Parse { field: String, message: String },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}
