use thiserror::Error;

/// Errors raised across the library and the CLI drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    /// A square-root radicand went negative.
    #[error("domain error: {what} (radicand = {radicand})")]
    Domain { what: String, radicand: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(
        "relativistic non-separability: particle {particle} cannot be traced out. \
         Once the rest-frame conditions are imposed the only admissible factorization \
         is presentation C (frozen Jacobi data of the external center of mass tensor \
         relative variables); single-particle subsystems exist only before the \
         rest-frame conditions are added"
    )]
    RelativisticNonSeparability { particle: u8 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn ensure_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(validation(format!("{name} must be finite")))
    }
}
