use thiserror::Error;

/// Errors raised across the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An operator that must be Hermitian (or a state that must be normalized) is not.
    #[error("convention violation: {0}")]
    Convention(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// Requested Hilbert space exceeds the dense budget.
    #[error("size limit exceeded: {0}")]
    Size(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("kernel error: {0}")]
    Kernel(String),
    #[error("seeding error: {0}")]
    Seeding(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("fit error: {0}")]
    Fit(String),
    /// A single trajectory failed inside an ensemble.
    #[error("trajectory {trajectory} (master seed {master_seed}, first stream {stream_id}) failed: {source}")]
    Trajectory {
        trajectory: usize,
        master_seed: u64,
        stream_id: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
