use std::fmt;

/// Exit status categories. Success is 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    /// Invalid configuration, arguments or input data.
    Config,
    /// A numerical routine failed on valid input.
    Numeric,
    /// A simulation study lost more than the tolerated share of replicates.
    PartialStudy,
}

impl FailureKind {
    pub fn exit_code(self) -> u8 {
        match self {
            FailureKind::Config => 2,
            FailureKind::Numeric => 3,
            FailureKind::PartialStudy => 4,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Config,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Numeric,
            message: message.into(),
        }
    }

    pub fn partial_study(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::PartialStudy,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.kind.exit_code()
    }

    /// Prefixes the message with where the failure happened.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl From<stmado::Error> for Failure {
    fn from(e: stmado::Error) -> Self {
        use stmado::Error as E;
        let kind = match e {
            E::NotPsd { .. } | E::NoConvergence(_) | E::SupportViolation => FailureKind::Numeric,
            _ => FailureKind::Config,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::config(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::config(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        let numeric: Failure = stmado::Error::NoConvergence("x".into()).into();
        assert_eq!(numeric.exit_code(), 3);
        let config: Failure = stmado::Error::InvalidParams("delta".into()).into();
        assert_eq!(config.exit_code(), 2);
        assert_eq!(Failure::partial_study("lost").exit_code(), 4);
    }

    #[test]
    fn context_prefixes_message() {
        let f = Failure::config("missing").context("reading data.csv");
        assert_eq!(f.to_string(), "reading data.csv: missing");
    }
}
