use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A modelling hypothesis on the kernel, damping function or data fails.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// A numerical rule could not reach the requested tolerance.
    #[error("accuracy error: achieved {achieved:.3e}, requested {requested:.3e} ({context})")]
    Accuracy {
        achieved: f64,
        requested: f64,
        context: String,
    },

    /// The convolution operator is not safely invertible on the sampled range.
    #[error("ill-posed inversion: {0}")]
    IllPosed(String),

    /// The caller combined objects that do not belong together.
    #[error("usage error: {0}")]
    Usage(String),

    /// The accumulated strain left the window where the damping slope is negative.
    #[error(
        "hyperbolicity breach at t = {time:.6e}, x = {x:.6e}: |accumulated strain| = {value:.6e} > theta = {theta:.6e}"
    )]
    HyperbolicityBreach {
        time: f64,
        x: f64,
        value: f64,
        theta: f64,
    },

    /// The time stepper produced non-finite values or its corrector stopped contracting.
    #[error("divergence after t = {last_valid_time:.6e}: {reason}")]
    Divergence { last_valid_time: f64, reason: String },

    /// Malformed run configuration or input table.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
