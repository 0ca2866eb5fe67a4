use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Non-finite entries, mismatched dimensions or out-of-range parameters.
    #[error("invalid input: {0}")]
    Validation(String),

    /// The mass matrix handed to an eigen-analysis is not positive definite.
    #[error("mass matrix is not positive definite (pivot {pivot} = {value:e})")]
    SingularMass { pivot: usize, value: f64 },

    /// The tangent-space mass `Nᵀ M N` is rank deficient, so the reduced
    /// system cannot be advanced.
    #[error("reduced mass matrix is singular (pivot {pivot} = {value:e})")]
    SingularReducedMass { pivot: usize, value: f64 },

    #[error("model error: {0}")]
    Model(String),

    #[error("position assembly did not converge after {iterations} iterations (|q| = {residual:e})")]
    Assembly { iterations: usize, residual: f64 },

    #[error(
        "step at t = {t} did not converge in {iterations} iterations \
         (|dx| = {increment:e}, |q| = {q_norm:e}, |qd| = {qd_norm:e}, |qdd| = {qdd_norm:e})"
    )]
    StepDivergence {
        t: f64,
        iterations: usize,
        increment: f64,
        q_norm: f64,
        qd_norm: f64,
        qdd_norm: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
