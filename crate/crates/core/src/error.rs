use thiserror::Error;

/// Errors raised by the bandit environment, oracles, and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("arm index {index} out of range for {arms} arms")]
    ArmOutOfRange { index: usize, arms: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{what}: {count} candidates exceeds the enumeration cap of {cap}")]
    TooLarge { what: &'static str, count: u128, cap: u128 },

    #[error("no strictly positive gap exists: every permissible super-arm is optimal")]
    NoPositiveGap,

    #[error("instance generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    /// A run failed mid-way; the rounds completed so far are kept.
    #[error("run aborted at round {round}: {source}")]
    Aborted {
        round: u64,
        #[source]
        source: Box<Error>,
        partial: Box<crate::trace::RegretTrace>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Short machine-readable tag, used by the CLI's structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ArmOutOfRange { .. } => "environment",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Usage(_) => "usage",
            Error::TooLarge { .. } => "too_large",
            Error::NoPositiveGap => "no_positive_gap",
            Error::Generation { .. } => "generation",
            Error::Aggregation(_) => "aggregation",
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
            Error::Aborted { .. } => "aborted",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
