use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown iterator `{iterator}` in access to `{tensor}`")]
    UnknownIterator { tensor: String, iterator: String },

    #[error("tensor `{tensor}` used with {found} dimensions, previously {expected}")]
    RankMismatch {
        tensor: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("singular space-time transformation (det = {det})")]
    SingularStt { det: i64 },

    #[error("invalid loop selection: {0}")]
    InvalidSelection(String),

    #[error("unsupported design point: {0}")]
    Unsupported(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("simulation fault at cycle {cycle}: {kind}")]
    SimFault { cycle: u64, kind: FaultKind },

    #[error("tensor `{tensor}`: {message}")]
    Extent { tensor: String, message: String },

    #[error("tensor format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultKind {
    /// Address stream left the tensor extent.
    BankRange { bank: usize, tensor: String },
    /// Same accumulator written more than once in one cycle.
    DoubleWrite { tensor: String, index: Vec<usize> },
    /// A PE port needed data but nothing drives it.
    UndrivenPort { tensor: String, pe: [usize; 2] },
    /// A PE was scheduled for two MACs in one cycle.
    DoubleIssue { pe: [usize; 2] },
}

impl std::fmt::Display for FaultKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FaultKind::BankRange { bank, tensor } => {
                write!(f, "bank {bank} of `{tensor}` addressed outside the tensor extent")
            }
            FaultKind::DoubleWrite { tensor, index } => {
                write!(f, "`{tensor}`{index:?} written twice in one cycle")
            }
            FaultKind::UndrivenPort { tensor, pe } => {
                write!(f, "port `{tensor}` of PE ({}, {}) has no driver", pe[0], pe[1])
            }
            FaultKind::DoubleIssue { pe } => {
                write!(f, "PE ({}, {}) issued two operations in one cycle", pe[0], pe[1])
            }
        }
    }
}
