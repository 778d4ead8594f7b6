use thiserror::Error;

/// Errors surfaced by the engine.
///
/// Exit-code mapping used by the CLI: configuration problems map to 2,
/// oracle infeasibility to 3, numerical failures to 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("Q-learning diverged (non-finite loss) at episode {episode}")]
    Divergence { episode: usize },

    #[error("degenerate spectrum: |denominator| < {min_abs:e} while computing {index}")]
    DegenerateSpectrum { index: &'static str, min_abs: f64 },

    #[error("wavelength {wavelength_nm} nm outside grid range [{lo} nm, {hi} nm]")]
    WavelengthOutOfRange {
        wavelength_nm: f64,
        lo: f64,
        hi: f64,
    },

    #[error("covariance matrix not positive definite after jitter")]
    NotPositiveDefinite,

    #[error(
        "exhaustive oracle infeasible: C({n}, {k}) = {combinations} exceeds the enumeration cap {cap}"
    )]
    OracleInfeasible {
        n: usize,
        k: usize,
        combinations: u128,
        cap: u128,
    },

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("gradient check must run with dropout disabled (train mode with dropout is invalid)")]
    GradientCheckMode,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) => 2,
            Error::OracleInfeasible { .. } => 3,
            Error::NonFiniteLoss { .. } | Error::Divergence { .. } | Error::NotPositiveDefinite => {
                4
            }
            _ => 1,
        }
    }
}
