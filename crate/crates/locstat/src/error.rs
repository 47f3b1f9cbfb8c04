use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("model is not stable at u = {u:.4} (root margin {margin:.3e})")]
    Stability { u: f64, margin: f64 },

    #[error("missing capability: {0}")]
    Capability(String),

    #[error("operation not supported for the {0} family")]
    UnsupportedFamily(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("singular system (condition number {cond:.3e})")]
    Rank { cond: f64 },

    #[error("curvature vanishes ({0}); use the maximal bandwidth")]
    NearStationary(String),

    #[error("spectrum is flat in the {0} direction")]
    NearFlat(String),

    #[error("segmentation error: {0}")]
    Segmentation(String),

    #[error("matrix is not positive definite: {0}")]
    Definiteness(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
