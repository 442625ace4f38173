use thiserror::Error;

/// Every failure the library can report.
///
/// The CLI maps [`Error::Numerical`] to exit code 3 and everything else to
/// exit code 2 (see [`Error::is_numerical`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty matrix: a kernel needs at least one state")]
    EmptyMatrix,
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("negative or non-finite entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, deviation exceeds 1e-9")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("interpolation parameter t = {0} outside [0, 1]")]
    TOutOfRange(f64),
    #[error("benchmark kernel needs d >= 4, got {0}")]
    DTooSmall(usize),
    #[error("stationary distribution is not unique (eigenvalue 1 has multiplicity {multiplicity})")]
    NonUniqueStationary { multiplicity: usize },
    #[error("spectral gap undefined on a single-state space")]
    TrivialStateSpace,
    #[error("stationary mass of state {0} is zero")]
    ZeroStationaryMass(usize),
    #[error("distribution is not stationary for the kernel (||piP - pi||_1 = {0})")]
    NotStationary(f64),
    #[error("kernel is not reversible w.r.t. pi (max detailed-balance violation {0})")]
    NotReversible(f64),
    #[error("sample length must be at least 1")]
    ZeroLength,
    #[error("state {state} at position {position} outside [0, {d})")]
    StateOutOfRange { position: usize, state: usize, d: usize },
    #[error("smoothing is 0 and state {0} has no observed outgoing transition")]
    DegenerateCounts(usize),
    #[error("AR(1) sample has zero mean square")]
    AllZeroSample,
    #[error("AR(1) coefficient must satisfy |a| < 1, got {0}")]
    NonStationaryAr(f64),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("lambda = {lambda} must be below n/10 = {limit}")]
    LambdaTooLarge { lambda: f64, limit: f64 },
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("posterior puts mass on index {0} where the prior has none")]
    SupportViolation(usize),
    #[error("epsilon = {epsilon} must be below gamma = {gamma}")]
    EpsilonExceedsGamma { epsilon: f64, gamma: f64 },
    #[error("sample-size condition violated: {0}")]
    SampleSizeConditionViolated(String),
    #[error("Rio bound needs either gamma coefficients or a phi sequence")]
    MissingMixingInputs,
    #[error("trajectory has no labels")]
    MissingLabels,
    #[error("at least {required} replications required, got {got}")]
    TooFewReplications { required: usize, got: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
