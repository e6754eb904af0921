use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the planning, simulation and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unreadable file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed records: {0}")]
    Malformed(String),

    #[error("mesh has zero triangles")]
    EmptyMesh,

    #[error("mesh is not watertight ({0} unmatched edges)")]
    NotWatertight(usize),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {0} model points vs {1} observed points")]
    LengthMismatch(usize, usize),

    #[error("duplicate label {0}")]
    DuplicateLabel(String),

    #[error("incompatible jig configuration: {0}")]
    IncompatibleJig(String),

    #[error("missing catalog component {0}")]
    MissingComponent(String),

    #[error("no slot/plan correspondence for {0}")]
    NoCorrespondence(String),

    #[error("infeasible jig configuration: worst slot residual {0:.3} exceeds 10 mm")]
    InfeasibleJig(f64),

    #[error("plane misses the bone: {0}")]
    PlaneMissesBone(String),

    #[error("projected pattern misses the bone entirely")]
    PatternMissesBone,

    #[error("pattern point outside projector frustum")]
    OutsideFrustum,

    #[error("injected rotation not representable for plane {0}")]
    InjectionNotRepresentable(String),

    #[error("empty sample")]
    EmptySample,

    #[error("schema error: {0}")]
    Schema(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for file-system failures, as opposed to bad content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
