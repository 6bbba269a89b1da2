use adaclust_core::Error;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => match e {
                Error::Domain(_) => "domain",
                Error::NonFinite(_) => "non_finite",
                Error::DegenerateComponent { .. } => "degenerate_component",
                Error::EmptyCluster { .. } => "empty_cluster",
                Error::Init(_) => "init",
                Error::SingularBlock { .. } => "singular_block",
                Error::GeneratorTimeout { .. } => "generator_timeout",
                Error::Io { .. } => "io",
                Error::Parse { .. } => "parse",
                Error::LengthMismatch { .. } => "length_mismatch",
                Error::InvalidConfig(_) => "invalid_config",
            },
        }
    }

    /// One-line JSON error record for stderr.
    pub fn json_line(&self) -> String {
        serde_json::to_string(&ErrorLine {
            error: self.kind(),
            message: self.to_string(),
        })
        .expect("plain strings serialize")
    }
}
