use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular resolvent at omega = {omega:.6e} rad/s (nearest eigenvalue {nearest_re:.6e} {nearest_im:+.6e}i)")]
    SingularResolvent {
        omega: f64,
        nearest_re: f64,
        nearest_im: f64,
    },

    #[error("process matrix is not Hurwitz (max real eigenvalue part {max_real:.6e})")]
    NotHurwitz { max_real: f64 },

    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: String },

    #[error("{what} is not positive semidefinite (min eigenvalue {min_eig:.6e})")]
    NotPositiveSemidefinite { what: String, min_eig: f64 },

    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
