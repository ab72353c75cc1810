//! Crate-wide error type with exit-code mapping for the CLI.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // --- data / ingestion ---
    #[error("schema error: column `{0}` not found in input header")]
    MissingColumn(String),
    #[error("parse error at data row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("consistency error: {0}")]
    Consistency(String),

    // --- numerics ---
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("no convergence after {0} iterations")]
    Divergence(usize),
    #[error("complete separation detected in logistic fit")]
    Separation,
    #[error("nesting violation: likelihood-ratio statistic {0} is negative")]
    NestingViolation(f64),
    #[error("infeasible assignment: {0}")]
    Infeasible(String),
    #[error("domain error: {0}")]
    Domain(String),

    // --- design stage ---
    #[error("configuration error: {0}")]
    Config(String),
    #[error("empty design: {0}")]
    EmptyDesign(String),
    #[error("rerandomization criterion too tight: acceptance rate {0:e} over probe")]
    CriterionTooTight(f64),

    // --- balance ---
    #[error("undefined standardized mean difference for term `{0}`: zero pooled sd")]
    UndefinedSmd(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),

    // --- blinding / locks ---
    #[error("tamper detected: {0}")]
    Tamper(String),
    #[error("blinding violation: {0}")]
    BlindingViolation(String),

    // --- inference ---
    #[error("group of size {0} has undefined variance")]
    VarianceUndefined(usize),
    #[error("degenerate posterior: zero standard deviation")]
    DegeneratePosterior,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// CLI exit code: 2 usage/config, 3 data, 4 numeric, 5 blinding violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Toml(_) => 2,
            Error::MissingColumn(_)
            | Error::Parse { .. }
            | Error::EmptyInput(_)
            | Error::Consistency(_)
            | Error::Io(_)
            | Error::Json(_) => 3,
            Error::Tamper(_) | Error::BlindingViolation(_) => 5,
            _ => 4,
        }
    }
}
