//! Command errors and their process exit codes.

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] sgpuq::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for configuration and validation, 3 for solver failures, 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        use sgpuq::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e {
                E::NonConvergence { .. }
                | E::SolverFailure { .. }
                | E::BatchFailure { .. }
                | E::CurveTooShort { .. } => 3,
                E::Io(_) | E::Csv(_) | E::Json(_) => 4,
                _ => 2,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(sgpuq::Error::InvalidParams("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(sgpuq::Error::MissingSize(200.0)).exit_code(), 2);
        let solver = sgpuq::Error::SolverFailure {
            strain: 0.0,
            reason: "x".into(),
        };
        assert_eq!(CliError::from(solver).exit_code(), 3);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::io(Path::new("a"), io).exit_code(), 4);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::from(sgpuq::Error::Io(io)).exit_code(), 4);
    }
}
