use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("eigensolver did not converge within {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} is not a power of two")]
    BadDimension(usize),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("pauli string on line {line} has length {found}, expected {expected}")]
    InconsistentLength {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("empty frequency range [{min}, {max}] with {intervals} intervals")]
    EmptyRange { min: f64, max: f64, intervals: usize },

    #[error("decay probability undefined: zero coupling element at zero detuning")]
    DegenerateInput,

    #[error("error bound undefined: level {level} is degenerate with the first level")]
    DegenerateGap { level: usize },

    #[error("no weight on the decayed probe branch (probability {probability:e})")]
    NoDecaySupport { probability: f64 },

    #[error("ancilla weight on |1> is {weight:.6} of the decayed branch")]
    AncillaLeakage { weight: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
