use thiserror::Error;

use crate::month::MonthIndex;
use crate::suite::Suite;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column `{column}`: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },

    #[error("line {line}: micro row references unknown record_id `{record_id}`")]
    UnknownRecord { line: u64, record_id: String },

    #[error("no records for suite {0}")]
    NoRecords(Suite),

    #[error("no overlap between suites {old} and {new}")]
    NoOverlap { old: Suite, new: Suite },

    #[error("no conversion from suite {from} to suite {to}")]
    MissingConversion { from: Suite, to: Suite },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank-deficient design: column `{0}` is collinear with earlier columns")]
    RankDeficient(String),

    #[error("degenerate predictor: {0}")]
    DegeneratePredictor(String),

    #[error("constant column `{0}` cannot be standardized")]
    ConstantColumn(String),

    #[error("{0}")]
    Missing(String),

    #[error("trend fit did not converge after {iterations} iterations (last iterate (alpha, beta, gamma) = {last:?})")]
    NotConverged { iterations: usize, last: [f64; 3] },

    #[error("no doubling under fitted trend (alpha={alpha}, beta={beta})")]
    NoDoubling { alpha: f64, beta: f64 },

    #[error("no era defined for {0}")]
    NoEra(MonthIndex),

    #[error("no feasible configurations")]
    NoFeasibleConfigs,

    #[error("GP hyperparameter search failed (best theta={theta}, g={g}): {reason}")]
    GpOptimization { theta: f64, g: f64, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
