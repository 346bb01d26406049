use std::io;

use thiserror::Error;

use crate::geometry::{NodeId, RangingPair};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("node {0} has no position")]
    MissingNode(NodeId),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// The Jacobian of a range residual is undefined at the anchor itself.
    #[error("candidate coincides with anchor {0}")]
    SingularPoint(usize),

    #[error("non-finite cost during minimization")]
    NumericalFailure,

    #[error("degenerate baseline: d10 = {0} m")]
    DegenerateBaseline(f64),

    #[error("incomplete epoch: missing pair {0}")]
    IncompleteEpoch(RangingPair),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("topic `{topic}` carries {expected} payloads, got {found}")]
    TopicKind {
        topic: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}
