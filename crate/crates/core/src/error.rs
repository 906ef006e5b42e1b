use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Too few samples for a dependence statistic.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// The distance variance of an argument is zero, so dCor has no gradient.
    #[error("degenerate gradient: {0}")]
    DegenerateGradient(String),

    #[error("utterance too short: {samples} samples, analysis window needs {window}")]
    TooShort { samples: usize, window: usize },

    /// Zero-power speech or noise handed to the mixer.
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),

    #[error(
        "training diverged at epoch {epoch}, batch {batch}: loss={loss}, mse={mse}, \
         dcor_latent={dcor_latent:?}, dcor_output={dcor_output:?}"
    )]
    Diverged {
        epoch: usize,
        batch: usize,
        loss: f64,
        mse: f64,
        dcor_latent: Option<f64>,
        dcor_output: Option<f64>,
    },

    #[error("non-finite gradient for parameter {param}")]
    NonFiniteGradient { param: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
