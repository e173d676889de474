use thiserror::Error;

/// Bad input: unreadable or malformed config, invalid flag values.
#[derive(Debug, Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

/// A check ran to completion and did not hold.
#[derive(Debug, Error)]
#[error("check failed: {0}")]
pub struct CheckFailed(pub String);

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Config errors exit with 2; everything else (solver errors, failed
/// checks, I/O on outputs) with 1.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|c| c.is::<ConfigError>()) {
        EXIT_CONFIG
    } else {
        EXIT_NUMERIC
    }
}
