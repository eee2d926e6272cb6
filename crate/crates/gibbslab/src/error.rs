use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A word was used with a model or field of a different dimension.
    #[error("dimension mismatch: word has d={word}, expected d={expected}")]
    DimensionMismatch { word: u8, expected: u8 },

    /// A depth exceeds the configured maximum of a field.
    #[error("depth {depth} exceeds the configured max_depth {max_depth}")]
    DepthOverflow { depth: u32, max_depth: u32 },

    /// A resource cap was hit. `detail` names the cap and suggests a way out.
    #[error("resource limit exceeded: {detail}")]
    Resource { detail: String },

    /// A resource cap was hit mid-build; carries completed-prefix statistics.
    #[error(
        "resource limit exceeded after depth {completed_depth}: {detail} \
         ({touched_cells} cells touched so far)"
    )]
    PartialResult {
        detail: String,
        completed_depth: u32,
        touched_cells: u64,
    },

    /// An iterative numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Two supposedly equivalent constructions disagree beyond tolerance.
    #[error("internal consistency failure: {0}")]
    Inconsistency(String),

    /// A grid had no finite cell left to sum over.
    #[error("empty support: every cell value is zero")]
    EmptySupport,

    /// No survivor exists at the requested depth.
    #[error("no survivors at depth {depth}")]
    EmptyRange { depth: u32 },

    /// Text-format parse error with a 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Binary grid file format error.
    #[error("grid file error: {0}")]
    GridFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidInput(msg.into())
    }
}
