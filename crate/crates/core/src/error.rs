//! Error type shared across the crate.
//!
//! Variants map onto the CLI exit codes: configuration problems (2),
//! data problems (3), and internal invariant violations (4).

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad flag value, missing file path, out-of-range parameter.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input data at a known location.
    #[error("{path}:{line}: {message}")]
    Ingest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Input data inconsistent with the graph or with itself.
    #[error("data error: {0}")]
    Data(String),

    /// A path violates the structural decomposition rules.
    #[error("structural path error ({code}): {message}")]
    PathStructure { code: StructuralCode, message: String },

    /// A table lookup failed; precompute inputs do not cover the candidate paths.
    #[error("missing lookup: {0}")]
    MissingLookup(String),

    /// An instance exceeds the guard sizes of an exhaustive routine.
    #[error("refused: {0}")]
    Refused(String),

    /// A stage of the pipeline failed.
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    /// Broken internal invariant; indicates a bug, not bad input.
    #[error("internal invariant violation: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Reason codes for structural path errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuralCode {
    /// Node and edge counts do not alternate (nodes != edges + 1).
    Malformed,
    /// A hop is not backed by a graph triple in the recorded direction.
    MissingTriple,
    /// Fewer than three edges; no room for interaction, chain, and recommendation.
    TooShort,
    /// First node is not a user entity.
    StartNotUser,
    /// Last node is not a product entity.
    EndNotProduct,
    /// Second node (the linking interaction's product) is not a product entity.
    LinkNotProduct,
    /// A product entity appears inside the entity chain.
    ProductInChain,
}

impl std::fmt::Display for StructuralCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StructuralCode::Malformed => "malformed",
            StructuralCode::MissingTriple => "missing-triple",
            StructuralCode::TooShort => "too-short",
            StructuralCode::StartNotUser => "start-not-user",
            StructuralCode::EndNotProduct => "end-not-product",
            StructuralCode::LinkNotProduct => "link-not-product",
            StructuralCode::ProductInChain => "product-in-chain",
        };
        f.write_str(s)
    }
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code for this error (0 is success, so never returned here).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Refused(_) => 2,
            Error::Ingest { .. }
            | Error::Data(_)
            | Error::PathStructure { .. }
            | Error::MissingLookup(_)
            | Error::Io(_) => 3,
            Error::Internal(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
