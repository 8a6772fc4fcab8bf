use std::path::PathBuf;

/// Errors reported by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("corrupt compressed graph: {0}")]
    Corrupt(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("not a permutation: {0}")]
    NotPermutation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("incompatible counter arrays: {0}")]
    Incompatible(String),
    #[error("memory budget exceeded: counters need {needed} bytes, budget is {budget} bytes")]
    Budget { needed: u64, budget: u64 },
    #[error("size guard: {0}")]
    TooLarge(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("graph is not symmetric")]
    NotSymmetric,
    #[error("empty graph")]
    EmptyGraph,
    #[error("run was truncated at max_iters and has not stabilized")]
    TruncatedRun,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
