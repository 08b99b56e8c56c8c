use thiserror::Error;

/// Failures that stop a run before any check executes. All map to exit
/// code 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("`{0}` is neither a scenario file nor a builtin scenario")]
    NotFound(String),

    #[error("{location}: {message}")]
    Syntax { location: String, message: String },

    #[error("{location}: parse error: {message}")]
    Parse { location: String, message: String },

    #[error("{location}: unknown reference `{name}` ({what})")]
    UnknownReference {
        location: String,
        name: String,
        what: String,
    },

    #[error("{location}: index out of range: {message}")]
    IndexOutOfRange { location: String, message: String },

    #[error("{location}: antisymmetry violation: {message}")]
    AntisymmetryViolation { location: String, message: String },

    #[error("{location}: {message}")]
    Invalid { location: String, message: String },

    #[error("usage: {0}")]
    Usage(String),
}

impl CliError {
    /// Converts a core error raised while building an object declared at
    /// `location`.
    pub fn from_core(location: &str, err: contactforge_core::Error) -> Self {
        use contactforge_core::Error as E;
        let location = location.to_string();
        match err {
            E::Parse(p) => CliError::Parse {
                location,
                message: p.to_string(),
            },
            E::UnboundVariable(text) => {
                let (name, what) = match text.split_once(" (chart `") {
                    Some((n, rest)) => (
                        n.to_string(),
                        format!("not a coordinate of chart `{}`", rest.trim_end_matches("`)")),
                    ),
                    None => (text, "not a coordinate of the chart".into()),
                };
                CliError::UnknownReference { location, name, what }
            }
            E::IndexOutOfRange(message) => CliError::IndexOutOfRange { location, message },
            E::AntisymmetryViolation(message) => CliError::AntisymmetryViolation { location, message },
            other => CliError::Invalid {
                location,
                message: format!("{}: {other}", other.class()),
            },
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IoError",
            CliError::NotFound(_) => "NotFound",
            CliError::Syntax { .. } => "SyntaxError",
            CliError::Parse { .. } => "ParseError",
            CliError::UnknownReference { .. } => "UnknownReference",
            CliError::IndexOutOfRange { .. } => "IndexOutOfRange",
            CliError::AntisymmetryViolation { .. } => "AntisymmetryViolation",
            CliError::Invalid { .. } => "InvalidScenario",
            CliError::Usage(_) => "UsageError",
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
