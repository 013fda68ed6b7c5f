use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("interface mismatch between stages `{first}` and `{second}`: {detail}")]
    InterfaceMismatch {
        first: String,
        second: String,
        detail: String,
    },
    #[error("step budget exceeded ({0} steps): possible nontermination")]
    StepBudget(u64),
    #[error("coin stream exhausted")]
    CoinExhausted,
    #[error("loop unroll bound {bound} insufficient for loop #{loop_index}")]
    UnrollInsufficient { loop_index: usize, bound: usize },
    #[error("resource limit exceeded: {what} (limit {limit})")]
    Resource { what: &'static str, limit: u64 },
    #[error("enumeration guard exceeded: {0}")]
    Guard(String),
    #[error("impossible observation: the observed output has no model")]
    ImpossibleObservation,
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed DIMACS: {0}")]
    Dimacs(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn semantic(msg: impl Into<String>) -> Self {
        Error::Semantic(msg.into())
    }
}
