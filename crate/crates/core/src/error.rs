use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (symmetry residual {residual:.3e})")]
    NonHermitian { residual: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not positive semidefinite (eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("not a density matrix: {0}")]
    NotState(String),

    #[error("reference state is not faithful (eigenvalue {min_eigenvalue:.3e})")]
    NotFaithful { min_eigenvalue: f64 },

    #[error("ambient dimensions differ ({left} vs {right})")]
    AmbientMismatch { left: usize, right: usize },

    #[error("parameter sets differ: {0}")]
    ParameterMismatch(String),

    #[error("degenerate numerics: {0}")]
    DegenerateNumerics(String),

    #[error("grid too coarse: completion element has eigenvalue {min_eigenvalue:.3e}")]
    GridTooCoarse { min_eigenvalue: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
