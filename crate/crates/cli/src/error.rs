//! Error type for the command-line layer with the exit-code contract:
//! 0 success, 2 schema/usage, 3 solver failure, 4 data insufficiency.

use tickalloc_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("schema error in {path}: {message}")]
    Schema { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Error class reported on stderr alongside the message.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) | CliError::Schema { .. } | CliError::Io { .. } => "schema",
            CliError::Core(core) => match core_class(core) {
                ExitClass::Solver => "solver",
                ExitClass::Data => "data",
                ExitClass::Schema => "schema",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Schema { .. } | CliError::Io { .. } => 2,
            CliError::Core(core) => match core_class(core) {
                ExitClass::Solver => 3,
                ExitClass::Data => 4,
                ExitClass::Schema => 2,
            },
        }
    }
}

enum ExitClass {
    Schema,
    Solver,
    Data,
}

fn core_class(error: &CoreError) -> ExitClass {
    match error {
        CoreError::DegenerateObjective
        | CoreError::InfeasibleAllocation { .. }
        | CoreError::BisectionFailed { .. }
        | CoreError::IterationBudget { .. } => ExitClass::Solver,
        CoreError::SweepEntry { source, .. } => core_class(source),
        CoreError::EmptyEvents
        | CoreError::NoVolumeMass { .. }
        | CoreError::InsufficientData { .. }
        | CoreError::PathNotCovered { .. }
        | CoreError::ZeroLiquidityOnPath { .. } => ExitClass::Data,
        _ => ExitClass::Schema,
    }
}
