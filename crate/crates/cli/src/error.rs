use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] vaguelie::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input or configuration, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Model(e) => match e {
                vaguelie::Error::Parameter(_)
                | vaguelie::Error::Validation(_)
                | vaguelie::Error::Capacity { .. }
                | vaguelie::Error::Message(_) => 2,
                _ => 1,
            },
            CliError::Io(_) => 1,
        }
    }
}
