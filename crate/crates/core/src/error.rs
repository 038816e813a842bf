use thiserror::Error;

/// Errors raised by the field library.
#[derive(Debug, Error)]
pub enum FieldError {
    /// A constructor or configuration violated a structural invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed to reach its accuracy target.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A spectral density failed one of its required properties.
    #[error("certification failed: {property} violated at {witness:?} ({detail})")]
    Certification {
        property: &'static str,
        witness: Vec<f64>,
        detail: String,
    },

    /// A sampler was asked for more points than it supports.
    #[error("capacity exceeded: {requested} points requested, limit is {limit}")]
    Capacity { requested: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, FieldError>;
