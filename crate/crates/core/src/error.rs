use thiserror::Error;

/// Errors raised by the simulation modules and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step failure at t = {t}: pre-normalization norm {norm:e} underflowed (dt too large)")]
    StepFailure { t: f64, norm: f64 },

    #[error("truncation overflow at t = {t}: tail mass {tail_mass:e} exceeds {threshold:e}")]
    TruncationOverflow {
        t: f64,
        tail_mass: f64,
        threshold: f64,
    },

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Mandel Q undefined for mean excitation number {0}")]
    UndefinedQ(f64),

    #[error("corrupted density matrix: imaginary Wigner residue {residue:e} at ({x}, {y})")]
    CorruptedDensity { x: f64, y: f64, residue: f64 },

    #[error("no superposition time below t_max = {t_max}")]
    NoSuperpositionTime { t_max: f64 },

    #[error("step-size collapse at t = {t} (h = {h:e})")]
    Stiffness { t: f64, h: f64 },

    #[error("Poincaré strobe undefined: no active modulation channel")]
    StrobeUndefined,

    #[error("steady state not reached for f = {f} within t = {t_max}")]
    Convergence { f: f64, t_max: f64 },

    #[error("positivity breach at t = {t}: minimum eigenvalue {min_eigenvalue:e}")]
    PositivityBreach { t: f64, min_eigenvalue: f64 },

    #[error("dimension {dim} exceeds the dense-oracle guard {limit}")]
    DimensionGuard { dim: usize, limit: usize },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::StepFailure { .. } => "step-failure",
            Error::TruncationOverflow { .. } => "truncation-overflow",
            Error::Trajectory { source, .. } => source.kind(),
            Error::UndefinedQ(_) => "undefined-q",
            Error::CorruptedDensity { .. } => "corrupted-density",
            Error::NoSuperpositionTime { .. } => "no-superposition-time",
            Error::Stiffness { .. } => "stiffness",
            Error::StrobeUndefined => "strobe-undefined",
            Error::Convergence { .. } => "convergence",
            Error::PositivityBreach { .. } => "positivity-breach",
            Error::DimensionGuard { .. } => "dimension-guard",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
