use std::fmt;

/// Failure classes of the command line. Each has its own message prefix
/// and exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Spec,
    Validation,
    Io,
    Simulation,
    Dataset,
    Training,
    Checkpoint,
    Design,
    Aborted,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 10] = [
        ErrorKind::Usage,
        ErrorKind::Spec,
        ErrorKind::Validation,
        ErrorKind::Io,
        ErrorKind::Simulation,
        ErrorKind::Dataset,
        ErrorKind::Training,
        ErrorKind::Checkpoint,
        ErrorKind::Design,
        ErrorKind::Aborted,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            ErrorKind::Usage => "error[usage]",
            ErrorKind::Spec => "error[spec]",
            ErrorKind::Validation => "error[validation]",
            ErrorKind::Io => "error[io]",
            ErrorKind::Simulation => "error[simulation]",
            ErrorKind::Dataset => "error[dataset]",
            ErrorKind::Training => "error[training]",
            ErrorKind::Checkpoint => "error[checkpoint]",
            ErrorKind::Design => "error[design]",
            ErrorKind::Aborted => "error[aborted]",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Spec => 3,
            ErrorKind::Validation => 4,
            ErrorKind::Io => 5,
            ErrorKind::Simulation => 6,
            ErrorKind::Dataset => 7,
            ErrorKind::Training => 8,
            ErrorKind::Checkpoint => 9,
            ErrorKind::Design => 10,
            ErrorKind::Aborted => 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    /// The single stderr line: prefix and message with newlines folded.
    pub fn line(&self) -> String {
        let msg = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("{}: {msg}", self.kind.prefix())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(ErrorKind::Io, e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::new(ErrorKind::Io, e.to_string())
    }
}

/// Attaches a kind to any displayable error.
pub trait Context<T> {
    fn kind(self, kind: ErrorKind) -> CliResult<T>;
}

impl<T, E: fmt::Display> Context<T> for Result<T, E> {
    fn kind(self, kind: ErrorKind) -> CliResult<T> {
        self.map_err(|e| CliError::new(kind, e.to_string()))
    }
}

/// Core validation failures are the user's input; everything else from the
/// core during a run is a simulation failure.
pub fn core_kind(e: &modkit_core::Error) -> ErrorKind {
    use modkit_core::Error as E;
    match e {
        E::InvalidParams(_) | E::OutOfRange { .. } => ErrorKind::Validation,
        E::Dataset(_) => ErrorKind::Dataset,
        E::Infeasible { .. } => ErrorKind::Design,
        E::Io(_) | E::Csv(_) => ErrorKind::Io,
        E::Json(_) => ErrorKind::Spec,
        _ => ErrorKind::Simulation,
    }
}

impl From<modkit_core::Error> for CliError {
    fn from(e: modkit_core::Error) -> Self {
        CliError::new(core_kind(&e), e.to_string())
    }
}
