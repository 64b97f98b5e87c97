use thiserror::Error;

use crate::sdp::SolveStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("mode index {index} out of range for {modes} modes")]
    ModeOutOfRange { index: usize, modes: usize },

    #[error("beam splitter needs two distinct modes, got {0} twice")]
    SameMode(usize),

    #[error("not a permutation of 0..{0}")]
    InvalidPermutation(usize),

    #[error("occupation has no photons to squash")]
    NoPhotons,

    #[error("negative input {0} to a combinatorial function")]
    NegativeInput(i64),

    #[error("truncation too small: norm deficit {deficit:.3e} exceeds {bound:.1e}")]
    TruncationTooSmall { deficit: f64, bound: f64 },

    #[error("state index {index} is not valid for a {states}-state protocol")]
    InvalidStateIndex { index: usize, states: usize },

    #[error("closed-form moment requires A·A† diagonal (off-diagonal {offdiag:.3e})")]
    NotDiagonal { offdiag: f64 },

    #[error("phase-error programme is infeasible: observed statistics are inconsistent")]
    Infeasible,

    #[error("no conclusive phase statistics (denominator bound {0:.3e})")]
    NoConclusivePhaseStatistics(f64),

    #[error("SDP solver stopped with status {0:?}")]
    Solver(SolveStatus),

    #[error("insufficient points for a scaling fit: {0}")]
    InsufficientPoints(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
