//! Error classes and their exit codes.

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Missing, garbled or unusable input data.
    Input,
    /// Output directory could not be written.
    Output,
    /// Another run owns the output directory.
    Locked,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Input => 3,
            Kind::Output => 4,
            Kind::Locked => 5,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: Kind::Input,
            error: error.into(),
        }
    }

    pub fn locked(lock: &Path) -> Self {
        Self {
            kind: Kind::Locked,
            error: anyhow::anyhow!(
                "output directory is locked by another run ({}); remove it if no run is active",
                lock.display()
            ),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind.code())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub trait ResultExt<T> {
    fn input(self) -> Result<T, Failure>;
    fn output(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            kind: Kind::Input,
            error: e.into(),
        })
    }

    fn output(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            kind: Kind::Output,
            error: e.into(),
        })
    }
}
