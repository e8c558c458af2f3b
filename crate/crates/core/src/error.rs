use thiserror::Error;

use crate::cbf::QpError;
use crate::dynamics::DynamicsError;
use crate::nmpc::NmpcError;
use crate::policy::NetworkError;
use crate::scenario::ConfigError;
use crate::sim::SimError;
use crate::verification::VerificationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error. Each module has its own error enum; this wraps them
/// for callers that drive the whole stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Verification(#[from] VerificationError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Nmpc(#[from] NmpcError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
