//! IO, file formats, orchestration and the command implementations behind
//! the `ontopic` binary. Everything with observable behavior lives here so
//! integration tests can drive commands without spawning processes.

pub mod args;
pub mod commands;
pub mod formats;
pub mod pipeline;

use std::process::ExitCode;

/// Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
    Numeric(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Data(_) => ExitCode::from(3),
            CliError::Numeric(_) => ExitCode::from(4),
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Data(e) | CliError::Numeric(e) => format!("{e:#}"),
        }
    }
}

impl<E> From<E> for CliError
where
    E: Into<anyhow::Error>,
{
    fn from(e: E) -> Self {
        let err: anyhow::Error = e.into();
        if is_numeric_failure(&err) {
            CliError::Numeric(err)
        } else {
            CliError::Data(err)
        }
    }
}

/// Classifies divergence-style failures so they exit with their own code.
fn is_numeric_failure(err: &anyhow::Error) -> bool {
    use ontopic_core::encoder::EncoderError;
    use ontopic_core::linalg::LinalgError;
    use ontopic_core::oodstats::StatsError;
    use ontopic_core::trm::TrainError;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<TrainError>() {
            if matches!(
                e,
                TrainError::NonFiniteLoss { .. }
                    | TrainError::DegenerateGate { .. }
                    | TrainError::Encoder(EncoderError::NonFiniteActivation { .. })
            ) {
                return true;
            }
        }
        if let Some(e) = cause.downcast_ref::<EncoderError>() {
            if matches!(e, EncoderError::NonFiniteActivation { .. }) {
                return true;
            }
        }
        if let Some(e) = cause.downcast_ref::<StatsError>() {
            if matches!(
                e,
                StatsError::NonFiniteFeature { .. } | StatsError::Factorization(_)
            ) {
                return true;
            }
        }
        if cause.downcast_ref::<LinalgError>().is_some() {
            return true;
        }
    }
    false
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Output root fallback: `--out` flags win, then `ONTOPIC_OUT_ROOT`, then
/// the current directory.
pub const OUT_ROOT_ENV: &str = "ONTOPIC_OUT_ROOT";

pub fn resolve_out_dir(explicit: Option<&std::path::Path>, default_name: &str) -> std::path::PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(OUT_ROOT_ENV) {
            Some(root) => std::path::PathBuf::from(root).join(default_name),
            None => std::path::PathBuf::from(default_name),
        },
    }
}
