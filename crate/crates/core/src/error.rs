use thiserror::Error;

use crate::graph::GraphError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("zero state: every amplitude vanishes")]
    ZeroState,

    #[error("no environment register in this graph")]
    NoEnvironment,

    #[error("ket {0} is not a single-photon-per-vertex ket")]
    MultiOccupation(String),

    #[error("density matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("expansion order {0} exceeds the oracle cap of 5")]
    OrderCap(usize),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
