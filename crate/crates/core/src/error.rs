use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible parameters: p={p}, H={h}, c={c} (c must lie in [0, {c_max}))")]
    Infeasible { p: f64, h: f64, c: f64, c_max: f64 },

    #[error("positions must be strictly increasing and >= 1, got {0:?}")]
    NotIncreasing(Vec<usize>),

    #[error("ones and zeros sets overlap at position {0}")]
    Overlap(usize),

    #[error("brute-force enumeration limited to N <= {max}, got N = {n}")]
    TooLarge { n: usize, max: usize },

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error("response {y} exceeds the trial count N = {n}; raise N with an explicit override")]
    ResponseExceedsTrials { y: u32, n: u32 },

    #[error("coefficient vector has length {got}, model {model} with {columns} design columns needs {expected}")]
    Dimension {
        model: String,
        columns: usize,
        expected: usize,
        got: usize,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid response value `{value}` on line {line}: {reason}")]
    InvalidResponse {
        value: String,
        line: usize,
        reason: String,
    },

    #[error("invalid value `{value}` in column `{column}` on line {line}")]
    InvalidValue {
        column: String,
        value: String,
        line: usize,
    },

    #[error("categorical column `{column}`: {reason}")]
    Levels { column: String, reason: String },

    #[error("design matrix is rank deficient (rank {rank} < {columns}); dependent columns: {involved:?}")]
    RankDeficient {
        rank: usize,
        columns: usize,
        involved: Vec<String>,
    },

    #[error("likelihood is not finite at any starting point: {0}")]
    NoFiniteStart(String),

    #[error("fits were computed on different datasets ({0} vs {1})")]
    DigestMismatch(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
