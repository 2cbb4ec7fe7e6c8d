use thiserror::Error;

/// Errors raised across the modelling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: missing required column `{0}`")]
    MissingColumn(&'static str),

    #[error("parse error at data row {row}: unknown soil type `{label}`")]
    UnknownSoilType { row: usize, label: String },

    #[error("parse error at data row {row}, column `{column}`: `{token}` is not a number")]
    BadNumber {
        row: usize,
        column: &'static str,
        token: String,
    },

    #[error("invalid value at data row {row}, column `{column}`: {reason}")]
    InvalidValue {
        row: usize,
        column: &'static str,
        reason: &'static str,
    },

    #[error("summary error: variable `{0}` has no non-missing values")]
    AllMissing(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("singular design: column `{column}` is collinear with earlier columns")]
    SingularDesign { column: String },

    #[error("insufficient data: n = {n} observations for {params} parameters")]
    InsufficientData { n: usize, params: usize },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("no convergence after {iterations} iterations (best rss {best_rss:e})")]
    NoConvergence {
        iterations: usize,
        best_rss: f64,
        best_beta: Vec<f64>,
    },

    #[error("degenerate likelihood: residual sum of squares is zero")]
    DegenerateLikelihood,

    #[error("scaling error: column `{0}` is constant")]
    ConstantColumn(String),

    #[error("training diverged (non-finite loss) at iteration {0}")]
    Divergence(usize),

    #[error("architecture selection failed: no hidden size could be trained")]
    SelectionFailed,

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("recipe `{recipe}` failed on {failures} of {repeats} repeats")]
    RecipeFailed {
        recipe: String,
        failures: usize,
        repeats: usize,
    },

    #[error("model file error: {0}")]
    ModelFile(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
