use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },
    #[error("matrix is not a contraction (norm {norm})")]
    NotContraction { norm: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{function} is not defined at {point}")]
    OutsideDomain { function: String, point: String },
    #[error("{function} provides no derivative of order {order} at {point}")]
    MissingDerivative {
        function: String,
        order: usize,
        point: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown kind: {0}")]
    UnknownKind(String),
    #[error("kernel index {0} outside [-64, 64]")]
    KernelIndex(i32),
    #[error("empty grid")]
    EmptyGrid,
    #[error("modulus vanishes at step {0}")]
    DegenerateModulus(f64),
    #[error("multiple operator integral of order {order} exceeds the limit {limit}")]
    OrderTooLarge { order: usize, limit: usize },
    #[error("von Neumann bound violated: ‖f(T)‖ = {norm} > sup|f| = {bound}")]
    VonNeumann { norm: f64, bound: f64 },
    #[error("denominator vanished with numerator {numerator:e} (trial {trial})")]
    ZeroDenominator { numerator: f64, trial: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("function must be bounded: {0}")]
    Unbounded(String),
    #[error("degenerate sweep: {0}")]
    DegenerateSweep(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown experiment tag '{0}'")]
    UnknownTag(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
