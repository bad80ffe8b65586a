use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series has no present values")]
    EmptySeries,
    #[error("series is constant (min == max == {0})")]
    ConstantSeries(f64),
    #[error("split boundary {0} lies outside the series span")]
    OutOfRange(String),
    #[error("split leaves an empty training span")]
    EmptyTrain,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("timestamp {0} is not on the hour")]
    NonHourly(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("series spans do not overlap")]
    NoOverlap,
    #[error("variable `{name}` has {fraction:.4} residual gap fraction (limit {limit})")]
    ExcessiveGaps { name: String, fraction: f64, limit: f64 },
    #[error("weather variable `{0}` is not present")]
    MissingVariable(String),

    #[error("insufficient history for index {0}")]
    InsufficientHistory(usize),
    #[error("gap inside the feature window of index {0}")]
    GapInWindow(usize),
    #[error("weather window of index {0} leaves the frame")]
    InsufficientCoverage(usize),
    #[error("no feature rows survived")]
    EmptyMatrix,
    #[error("invalid feature spec: {0}")]
    InvalidSpec(String),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("invalid k = {k} for width {width}")]
    InvalidK { k: usize, width: usize },
    #[error("too few rows: {0}")]
    TooFewRows(String),

    #[error("regressors do not line up with the series: {0}")]
    MisalignedRegressors(String),
    #[error("no regressor row for hour {0}")]
    MissingRegressors(i64),
    #[error("invalid decomposer config: {0}")]
    InvalidConfig(String),

    #[error("empty training set")]
    EmptyTraining,
    #[error("feature width mismatch: model expects {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no value at lag index {0}")]
    GapAtLag(usize),
    #[error("run has no valid hours")]
    EmptyRun,
    #[error("reports mix energy types")]
    MixedEnergyTypes,
    #[error("runs cover different spans")]
    SpanMismatch,
    #[error("bundle error: {0}")]
    Bundle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
