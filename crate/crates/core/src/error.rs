//! Error type shared by every stage of the pipeline.

use thiserror::Error;

use crate::simplex::SolveStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("dataset file is empty")]
    EmptyFile,

    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),

    #[error("non-numeric feature cell {value:?} at row {row}, column {column:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite value at row {row}, column {column:?}")]
    NonFiniteValue { row: usize, column: String },

    #[error("sensor config invalid: {0}")]
    SensorConfig(String),

    #[error("split fractions must be positive and sum to 1, got {0:?}")]
    BadSplitFractions([f64; 3]),

    #[error("need at least 3 examples to split, got {0}")]
    TooFewExamples(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged (non-finite loss) at iteration {iteration}, step {step}")]
    Divergence { iteration: usize, step: f64 },

    #[error("need at least 2 classes present in training labels")]
    SingleClass,

    #[error(
        "no sensor ever reduced the collection loss; every subset is empty \
         (try a smaller alpha so error outweighs cost)"
    )]
    AllSubsetsEmpty,

    #[error(
        "greedy search converged to {distinct} distinct subset(s); \
         a tree needs at least 2 (try a smaller alpha or larger K)"
    )]
    DegenerateCollection { distinct: usize },

    #[error("tree construction requires distinct subsets; found duplicates")]
    DuplicateSubsets,

    #[error("tree spec invalid: {0}")]
    TreeSpec(String),

    #[error("linear program invalid: {0}")]
    BadProgram(String),

    #[error("solver returned {0:?}")]
    Solver(SolveStatus),

    #[error("model format mismatch: expected {expected:?}, found {found:?}")]
    ModelFormat { expected: String, found: String },

    #[error("config error: {0}")]
    Config(String),
}
