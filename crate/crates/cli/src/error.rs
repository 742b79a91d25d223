use std::path::{Path, PathBuf};

use causeway_core::ErrorKind;
use serde_json::json;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: causeway_core::Error },
    #[error(transparent)]
    Core(#[from] causeway_core::Error),
    #[error("{0}")]
    Service(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let kind = match self {
            CliError::Usage(_) => return EXIT_USAGE,
            CliError::Io { .. } | CliError::Service(_) => return EXIT_DATA,
            CliError::File { source, .. } | CliError::Core(source) => source.kind(),
        };
        match kind {
            ErrorKind::Numerical => EXIT_NUMERICAL,
            ErrorKind::Data | ErrorKind::NotFound | ErrorKind::Precondition => EXIT_DATA,
        }
    }

    pub fn code(&self) -> &'static str {
        match self.exit_code() {
            EXIT_USAGE => "usage",
            EXIT_NUMERICAL => "numerical",
            _ => "data",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({"error": {"code": self.code(), "exit_code": self.exit_code(), "message": self.to_string()}})
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

pub fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.into(), source })
}

/// Attaches the file path to a core error raised while parsing that file.
pub trait AtPath<T> {
    fn at(self, path: &Path) -> CliResult<T>;
}

impl<T> AtPath<T> for causeway_core::Result<T> {
    fn at(self, path: &Path) -> CliResult<T> {
        self.map_err(|source| CliError::File { path: path.into(), source })
    }
}

impl<T> AtPath<T> for Result<T, serde_json::Error> {
    fn at(self, path: &Path) -> CliResult<T> {
        self.map_err(|e| CliError::File { path: path.into(), source: e.into() })
    }
}
