use std::io;

use thiserror::Error;

use crate::decomp::Scheme;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate {coord} out of range for extent {extent} on axis {axis}")]
    Index { axis: char, coord: usize, extent: usize },

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid rank count {0}: must be a power of two")]
    InvalidRankCount(usize),

    #[error("inconsistent grid: {py} x {pz} != {p_total} ranks")]
    InconsistentGrid { p_total: usize, py: usize, pz: usize },

    #[error("over-decomposition: {0}")]
    OverDecomposition(String),

    #[error("{scheme} decomposition of {dims:?} supports at most P_max={max} ranks, got {ranks}")]
    ExceedsMaxRanks {
        scheme: Scheme,
        dims: [usize; 3],
        ranks: usize,
        max: usize,
    },

    #[error("invalid chunk count K={k}: must be >= 1 and divide the chunk axis extent {extent}")]
    InvalidChunkCount { k: usize, extent: usize },

    #[error("non-finite sample at offset {0}")]
    NonFinite(usize),

    #[error("layout error: {0}")]
    State(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("transport error with rank {rank}: {reason}")]
    Transport { rank: usize, reason: String },

    #[error("during {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("oracle input too large: {len} points exceeds {limit}")]
    OracleTooLarge { len: usize, limit: usize },

    #[error("bad tensor file: {0}")]
    Format(String),

    #[error("worker panicked: {0}")]
    WorkerPanic(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
