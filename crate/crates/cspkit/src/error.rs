//! Crate-wide error type.
//!
//! Errors fall into two families that map onto process exit codes:
//! input/contract violations (exit code 1) and numerical failures
//! discovered mid-computation (exit code 2).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed on-disk artifact (bad magic, truncated header, version mismatch).
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    /// A specific record in a trial or feature file failed validation.
    #[error("record {record}: {reason}")]
    InvalidRecord { record: usize, reason: String },

    /// Generic precondition violation, described in plain words.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("sampling rate mismatch: expected {expected} Hz, got {got} Hz")]
    FsMismatch { expected: f64, got: f64 },

    #[error("class {class} has no trials")]
    EmptyClass { class: u32 },

    #[error("class {class} lost all {rejected} trials to outlier masking")]
    ClassDepleted { class: u32, rejected: usize },

    /// Trial is identically zero, so the trace normalizer is undefined.
    #[error("zero trace: trial {trial_id} is all zeros, cannot normalize covariance")]
    ZeroTrace { trial_id: u32 },

    /// Composite covariance is numerically rank-deficient; whitening would
    /// amplify noise without bound. Reduce dimensionality instead.
    #[error(
        "rank-deficient composite covariance (min eigenvalue {min_eig:.3e}); \
         reduce the channel count or record more data before extracting filters"
    )]
    RankDeficient { min_eig: f64 },

    #[error("unstable filter design: {0}")]
    UnstableFilter(String),

    /// The joint-diagonalization pair update became singular with residual
    /// off-diagonal mass left to remove.
    #[error("singular diagonalization update at iteration {iteration} (pair {i},{j})")]
    SingularUpdate { iteration: usize, i: usize, j: usize },

    #[error("filter {filter} produced a zero-variance output row on trial {trial_id}")]
    ZeroVarianceRow { filter: usize, trial_id: u32 },

    #[error("model has no rules")]
    NoRules,

    /// Wraps a module error with the pipeline stage it occurred in.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code for the CLI: 1 = validation, 2 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ZeroTrace { .. }
            | Error::RankDeficient { .. }
            | Error::UnstableFilter(_)
            | Error::SingularUpdate { .. }
            | Error::ZeroVarianceRow { .. } => 2,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
