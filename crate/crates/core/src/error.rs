use thiserror::Error;

use crate::linking::LinkingResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("acquisition {0} has zero energy across the ensemble")]
    ZeroEnergyAcquisition(usize),

    #[error("need at least {needed} acquisitions, got {got}")]
    TooFewAcquisitions { needed: usize, got: usize },

    #[error("index {index} out of range for {len} acquisitions")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("closure triplet indices must be distinct, got ({0}, {1}, {2})")]
    RepeatedIndex(usize, usize, usize),

    #[error("regularization weight {0} outside [0, 1)")]
    InvalidBeta(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("coherence magnitude matrix is not invertible")]
    SingularMagnitudeMatrix,

    #[error("Hermitian eigensolver did not converge")]
    EigensolverFailure,

    #[error("solver stopped after {} iterations with gradient norm {:.3e}", .0.iterations, .0.gradient_norm)]
    DidNotConverge(Box<LinkingResult>),

    #[error("objective evaluated to a non-finite value")]
    NonFiniteObjective,

    #[error("orthogonality not reached: |<secondary, primary>| = {inner_product:.4} >= {tolerance:.4}")]
    OrthogonalityNotReached { inner_product: f64, tolerance: f64 },

    #[error("degenerate objective bounds: f_max = {f_max}, f_min = {f_min}")]
    DegenerateBounds { f_max: f64, f_min: f64 },

    #[error("no objective bounds defined for {0}")]
    UnsupportedBounds(String),

    #[error("noise floor {0} must lie in [0, 1)")]
    InvalidNoiseFloor(f64),

    #[error("model covariance is singular or not positive definite")]
    SingularSigma,

    #[error("linking result carries no secondary solution")]
    MissingSecondary,

    #[error("ambiguity undefined: primary value is zero")]
    UndefinedAmbiguity,

    #[error("rational model fit diverged")]
    FitDiverged,

    #[error("rational model fit is rank deficient (all values equal)")]
    RankDeficient,

    #[error("need at least {needed} points with distinct stack sizes, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("no noise-floor model for {0}")]
    UnknownMethodScheme(String),

    #[error("covariance is not positive semidefinite")]
    NotPsd,

    #[error("Cholesky factorization failed")]
    CholeskyFailure,

    #[error("scene regions leave gaps or overlap")]
    RegionGapOrOverlap,

    #[error("empty sample")]
    EmptySample,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("ensemble {index}: {source}")]
    Ensemble {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
