use thiserror::Error;

use crate::instance::{EdgeId, Pair, VertexId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge {index} is a self-loop")]
    SelfLoop { index: usize },

    #[error("edge {index} has endpoint {vertex} outside [0, {n})")]
    EndpointOutOfRange { index: usize, vertex: VertexId, n: usize },

    #[error("{what} line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("infeasible generator parameters: {0}")]
    InfeasibleParams(String),

    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),

    #[error("vertex {vertex} has {degree} relevant edges, above the cap of {cap}")]
    DegreeAboveCap {
        vertex: VertexId,
        degree: usize,
        cap: usize,
    },

    #[error("edge {edge} is not a real edge relevant to vertex {vertex}")]
    IrrelevantEdge { vertex: VertexId, edge: EdgeId },

    #[error("pair class {pair} has {size} edges, above the exhaustive-search cap of {cap}")]
    ClassTooLarge { pair: Pair, size: usize, cap: usize },

    #[error("no EFX-cut of pair {pair} for cutter {cutter}; the valuation is not monotone")]
    NoEfxCut { cutter: VertexId, pair: Pair },

    #[error("three-way split of pair {pair} found no qualifying good (pair admits a common cut or valuation is not monotone)")]
    NoQualifyingGood { pair: Pair },

    #[error("edge {edge} is not part of pair {pair}")]
    ForeignEdge { edge: EdgeId, pair: Pair },

    #[error("regime {regime} is not applicable: {reason}")]
    RegimeNotApplicable { regime: String, reason: String },

    #[error("no regime applies: {0}")]
    NoRegime(String),

    #[error("internal invariant breach: {0}")]
    InvariantBreach(String),

    #[error("iteration cap exceeded in {stage}: termination argument violated")]
    IterationCap { stage: &'static str },

    #[error("enumeration needs {needed} assignments, above the cap of {cap}")]
    CapExceeded { needed: u128, cap: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(what: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            what,
            line,
            message: message.into(),
        }
    }

    pub(crate) fn breach(message: impl Into<String>) -> Self {
        Error::InvariantBreach(message.into())
    }
}
