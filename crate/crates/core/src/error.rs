use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("inadmissible cubic parameters: {0}")]
    Inadmissible(String),

    #[error("form is not rank-one convex: f(x⊗y) = {value:.3e} at a witness")]
    NotRankOneConvex { value: f64 },

    #[error("singular map: |det| = {0:.3e}")]
    SingularMap(f64),

    #[error("residual form is not positive semidefinite: smallest eigenvalue {0:.3e}")]
    NotPsd(f64),

    #[error("perturbation does not vanish on the boundary: max |w| = {0:.3e}")]
    BoundaryNonzero(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
