use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),

    #[error(transparent)]
    Core(#[from] coalsisr_core::Error),

    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}
