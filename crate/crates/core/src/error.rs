use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance {tol:e} on [{a}, {b}] (estimate {estimate}, error {error:e})")]
    Tolerance {
        a: f64,
        b: f64,
        tol: f64,
        estimate: f64,
        error: f64,
    },

    #[error("kernel {0} was not registered on this path")]
    Unregistered(usize),

    #[error("singular kernel hit at a particle position and no policy was set")]
    Singular,

    #[error("rejection budget of {trials} trials exhausted; acceptance rate estimate {rate:e}")]
    RejectionBudget { trials: u64, rate: f64 },

    #[error("newton iteration failed after {iterations} steps, residual trace {trace:?}")]
    Newton { iterations: usize, trace: Vec<f64> },

    #[error("config error: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
