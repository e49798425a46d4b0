use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    Validation(String),

    /// Velocity requested where the density is below the node floor.
    #[error("node region at x = {x}, t = {t}: rho = {rho:e} is below the velocity floor")]
    NodeRegion { x: f64, t: f64, rho: f64 },

    /// A proposal point had density above the sampling bound, so the bound is stale.
    #[error("density bound violated at x = {x}, t = {t}: rho = {rho} > bound = {bound}")]
    BoundViolation { x: f64, t: f64, rho: f64, bound: f64 },

    #[error("quantile P = {0} lies on the support edge and has no finite inverse")]
    Boundary(f64),

    /// Guidance integration stepped into a node region.
    #[error("guidance trajectory hit a node after step {last_good_step} (t = {t}, x = {x})")]
    NodeEncounter { last_good_step: usize, t: f64, x: f64 },

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        if err.is_io_error() {
            Error::Io(err.to_string())
        } else {
            Error::Parse(err.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
