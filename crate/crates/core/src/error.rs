use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Sizes or dimensions of the inputs do not fit together.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// The requested mode or size is not supported by this routine.
    #[error("unsupported: {0}")]
    Capability(String),
    /// A model or cost was differentiated at a declared nondifferentiable point.
    #[error("evaluation at a kink: {0}")]
    Kink(String),
    /// The optimizer could not make progress.
    #[error("optimization failed: {0}")]
    Optimization(String),
    /// Text input could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn is_kink(&self) -> bool {
        matches!(self, Error::Kink(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
