use ndgrad::GradError;

#[derive(Debug, thiserror::Error)]
pub enum DcsError {
    #[error("sequence length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid token: {0}")]
    InvalidToken(String),
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("zero variance in {0}; rank correlation undefined")]
    ZeroVariance(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no oracle score for {0}")]
    LookupMiss(String),
    #[error("sequence space of {0} points exceeds the enumeration limit {1}")]
    SpaceTooLarge(u128, u64),
    #[error("duplicate sequence {0}")]
    Duplicate(String),
    #[error("constraints unsatisfiable: {0}")]
    Unsatisfiable(String),
    #[error("proxy has not been trained")]
    UntrainedProxy,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DcsError> = std::result::Result<T, E>;
