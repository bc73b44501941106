use crate::geometry::Vector;
use crate::solver::ConvergenceCertificate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension must be positive")]
    ZeroDimension,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },

    #[error("polytope needs at least one vertex")]
    EmptyPolytope,

    #[error("invalid convex weights: {0}")]
    InvalidWeights(String),

    #[error("averaging depth must be at least 1")]
    ZeroAveragingDepth,

    #[error("word budget must be at least 1")]
    InvalidWordBudget,

    #[error("sample count must be at least {min}, got {got}")]
    InvalidSampleCount { min: usize, got: usize },

    #[error("semigroup enumeration exceeded the element cap of {cap}")]
    ElementCapExceeded { cap: usize },

    #[error("duplicate generator label `{0}`")]
    DuplicateLabel(String),

    #[error("starting point is not inside K (distance {distance:e})")]
    StartOutsidePolytope { distance: f64 },

    #[error("averaging did not reach tolerance by n = {}: best residual {best_residual:e}", certificate.n_final)]
    NotConverged {
        best_point: Vector,
        best_residual: f64,
        certificate: ConvergenceCertificate,
    },

    #[error("common fixed set of the generators is empty")]
    EmptyFixedSet,

    #[error("common fixed set does not meet K: {0}")]
    FixedSetMissesPolytope(String),

    #[error("fixed point residual {residual:e} exceeds tolerance {tol:e}")]
    ToleranceNotMet { residual: f64, tol: f64 },

    #[error("family {0} needs a product structure")]
    FamilyNeedsProduct(&'static str),

    #[error("operator `{0}` is not linear (nonzero offset)")]
    NonLinearOperator(String),

    #[error("subspace basis is linearly dependent")]
    DegenerateBasis,

    #[error("functional is identically zero on the subspace")]
    ZeroFunctional,

    #[error("dual constraint set is empty")]
    EmptyConstraintSet,

    #[error("vertex enumeration needs {needed} probes, over the limit of {limit}")]
    EnumerationTooLarge { needed: u128, limit: u128 },

    #[error("invariant `{invariant}` violated by operator `{operator}` (residual {residual:e})")]
    InvariantViolation {
        invariant: &'static str,
        operator: String,
        residual: f64,
    },

    #[error("operator structure failed validation: {0}")]
    InvalidStructure(String),

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error("linear program did not terminate within {0} pivots")]
    PivotLimit(usize),
}

impl Error {
    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }
}
