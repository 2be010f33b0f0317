use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular tool orientation (denominator {denominator:e})")]
    SingularOrientation { denominator: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("tool never touched the line-net")]
    EmptyResult,

    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    #[error("unbalanced design: {0}")]
    Unbalanced(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command line front end.
    ///
    /// 1: configuration, 2: input files, 3: simulation / computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 1,
            Error::Parse { .. } | Error::Input(_) | Error::Io { .. } | Error::Unbalanced(_) => 2,
            Error::SingularOrientation { .. }
            | Error::Resource(_)
            | Error::EmptyResult
            | Error::RankDeficient(_) => 3,
        }
    }
}
