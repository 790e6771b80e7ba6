use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("degree {requested} exceeds the cap {cap}")]
    DegreeTooLarge { requested: usize, cap: usize },
    #[error("scalar part is zero")]
    ZeroScalar,
    #[error("scalar part must be 1, found {0}")]
    NotUnital(f64),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("word of length {len} exceeds tensor degree {degree}")]
    WordTooLong { len: usize, degree: usize },
    #[error("letter {letter} outside the alphabet 1..={dim}")]
    InvalidLetter { letter: usize, dim: usize },
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("time {0} is not a grid point")]
    OffGrid(f64),
    #[error("time {t} outside the span [{lo}, {hi}]")]
    OutOfSpan { t: f64, lo: f64, hi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grids differ")]
    GridMismatch,
    #[error("windows are not adjacent: {0} != {1}")]
    NotAdjacent(f64, f64),
    #[error("no convergence at depth {depth}, last delta {delta:e}")]
    NonConvergence { depth: usize, delta: f64 },
    #[error("point {0:?} lies outside the domain")]
    DomainExit(Vec<f64>),
    #[error("open cover leaves {witness} uncovered")]
    CoverageGap { witness: f64 },
    #[error("invalid cover: {0}")]
    InvalidCover(String),
    #[error("no transition from chart {from} to chart {to}")]
    MissingTransition { from: usize, to: usize },
    #[error("no chart contains {0:?}")]
    NoChart(Vec<f64>),
    #[error("atlas {0} has no global chart")]
    NoGlobalChart(String),
    #[error("unknown jet or one-form: {0}")]
    UnknownJet(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of an iterative numerical procedure.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
