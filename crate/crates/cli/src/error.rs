use liqnet::contagion::ContagionError;
use liqnet::ingest::IngestError;
use liqnet::io::IoError;
use liqnet::metrics::MetricsError;
use liqnet::oracle::OracleError;
use liqnet::reconstruct::ReconstructError;
use liqnet::synth::SynthError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Io(String),
    /// The run finished but a check it performs did not pass.
    #[error("{0}")]
    CheckFailed(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::CheckFailed(_) => "check failed",
            CliError::Validation(_) => "invalid input",
            CliError::Infeasible(_) => "infeasible configuration",
            CliError::Io(_) => "I/O error",
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ReconstructError> for CliError {
    fn from(e: ReconstructError) -> Self {
        use ReconstructError::*;
        match e {
            Ingest(inner) => inner.into(),
            InvalidConfig(_) | MixedYears(_) | NoBanks => CliError::Validation(e.to_string()),
            NoSupport
            | Unattainable { .. }
            | RetryCapExceeded { .. }
            | IpfNotConverged { .. }
            | InfeasiblePattern { .. }
            | InconsistentTargets { .. }
            | EmptyNetwork => CliError::Infeasible(e.to_string()),
        }
    }
}

impl From<ContagionError> for CliError {
    fn from(e: ContagionError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let io = match &e {
            IoError::Io { .. } => true,
            IoError::Csv { source, .. } => source.is_io_error(),
            IoError::Json { source, .. } => source.is_io(),
            IoError::Format { .. } => false,
        };
        if io {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match &e {
            SynthError::Invalid(_) => CliError::Validation(e.to_string()),
            SynthError::Io(_) => CliError::Io(e.to_string()),
            SynthError::Csv(c) if c.is_io_error() => CliError::Io(e.to_string()),
            SynthError::Csv(_) => CliError::Validation(e.to_string()),
        }
    }
}
