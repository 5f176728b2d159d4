use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("infeasible scene: {0}")]
    InfeasibleScene(String),

    #[error("degenerate geometry: satellite {sat} and terminal {ut} coincide")]
    DegenerateGeometry { sat: usize, ut: usize },

    #[error("angle {angle} rad outside [0, pi/2]")]
    Domain { angle: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate WMMSE state for user {user}: {reason}")]
    Degenerate { user: usize, reason: String },

    #[error("local solve failed at satellite {sat}: {source}")]
    LocalSolve {
        sat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("overhead mismatch at satellite {sat}: formula {formula}, counted {counted}")]
    OverheadMismatch { sat: usize, formula: u64, counted: u64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }
}
