use thiserror::Error;

use crate::map_model::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("invalid map spec: {0}")]
    Spec(String),

    #[error("map validation failed: {}", .0.summary())]
    Validation(Box<ValidationReport>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {y} outside the image of branch {branch}")]
    OutsideImage { branch: usize, y: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("map is not transitive: {0}")]
    NotTransitive(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// Whether the error stems from bad input rather than a failed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::Spec(_)
                | Error::Validation(_)
                | Error::InvalidArgument(_)
                | Error::OutsideImage { .. }
                | Error::Unsupported(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
