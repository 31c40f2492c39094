use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature did not converge on [{lo}, {hi}] (estimate {estimate:e}, tol {tol:e})")]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        tol: f64,
    },

    #[error("evaluation outside the domain: {0}")]
    Domain(String),

    #[error("evaluation on the light cone t = r = {0}")]
    LightCone(f64),

    #[error("non-generic data: leading tail coefficient vanishes ({0:e}), the attractor cannot be matched")]
    NonGenericData(f64),

    #[error("blow-up or instability at t = {t}: {reason}")]
    Blowup { t: f64, reason: String },

    #[error("series changes sign inside the window [{t_lo}, {t_hi}] near t = {at}")]
    SignChange { t_lo: f64, t_hi: f64, at: f64 },

    #[error("signal below noise floor: {0}")]
    Degenerate(String),

    #[error("ill-conditioned fit (condition {0:e})")]
    IllConditioned(f64),

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("window [{t_lo}, {t_hi}] holds {samples} samples, need at least {needed}")]
    Window {
        t_lo: f64,
        t_hi: f64,
        samples: usize,
        needed: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 config, 3 numerical, 4 blow-up.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Io { .. } => 2,
            Error::Blowup { .. } => 4,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
