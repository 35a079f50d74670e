use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] lambda2p::Error),

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("oracle check failed: max |diff| = {max_diff:.3e} exceeds {tolerance}, norm drift {norm_drift:.3e}")]
    CheckFailed {
        max_diff: f64,
        tolerance: f64,
        norm_drift: f64,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Process exit status: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        use lambda2p::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Model(E::Domain { .. } | E::Unsupported(_) | E::GridCapture { .. }) => 2,
            CliError::Model(_) | CliError::CheckFailed { .. } => 3,
        }
    }
}
