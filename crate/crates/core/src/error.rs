use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("assignment length {got} does not match node count {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid bit string {0:?}")]
    InvalidBitString(String),

    #[error("{what} has {got} qubits/nodes, limit is {limit}")]
    CapacityExceeded {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid QAOA parameters: {0}")]
    InvalidParams(String),

    #[error("invalid noise profile: {0}")]
    InvalidNoise(String),

    #[error("shot count must be positive")]
    ZeroShots,

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("gate {gate} has no decomposition into native set {native}")]
    NoDecomposition { gate: String, native: String },

    #[error("invalid coupling map: {0}")]
    InvalidCoupling(String),

    #[error("backend {backend:?} does not support {capability}")]
    Capability { backend: String, capability: String },

    #[error("unknown backend {0:?}")]
    UnknownBackend(String),

    #[error("duplicate backend name {0:?}")]
    DuplicateBackend(String),

    #[error("unknown job {0:?}")]
    UnknownJob(String),

    #[error("result payload does not match backend {backend:?}: {detail}")]
    PayloadMismatch { backend: String, detail: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid landscape: {0}")]
    InvalidLandscape(String),

    #[error("reference landscape provenance mismatch: {0}")]
    Provenance(String),

    #[error("checkpoint does not match this run: {0}")]
    Checkpoint(String),

    #[error("at grid point (gamma index {gamma_index}, beta index {beta_index}): {source}")]
    AtPoint {
        gamma_index: usize,
        beta_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether this error (or the error it wraps) is a backend capability violation.
    pub fn is_capability(&self) -> bool {
        match self {
            Error::Capability { .. } => true,
            Error::AtPoint { source, .. } => source.is_capability(),
            _ => false,
        }
    }
}
