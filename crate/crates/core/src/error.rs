use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Validity(String),

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("fidelity normalization is zero (target Choi matrix vanishes)")]
    ZeroTarget,

    #[error("shallow well has disappeared at bias {phi_b_over_2pi:.6}*2pi")]
    WellDisappeared { phi_b_over_2pi: f64 },

    #[error("DVR grid too coarse: level energy moved by {change:.3e} rad/ns on refinement (tolerance {tolerance:.1e})")]
    Resolution { change: f64, tolerance: f64 },

    #[error("fit of {curve} exceeds quality threshold: max relative error {error:.3e} > {threshold:.1e}")]
    FitQuality {
        curve: &'static str,
        error: f64,
        threshold: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("optimizer aborted: {0}")]
    Optimizer(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
