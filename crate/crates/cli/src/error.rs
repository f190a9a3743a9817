use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Core(#[from] lipstab::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 1 for infeasibility and runtime failures, 2 for configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(vec![msg.into()])
    }
}
