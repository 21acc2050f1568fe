//! Exit-code contract: 0 ok, 1 I/O, 2 validation, 3 tolerance breach.

use std::process::ExitCode;

pub const OK: u8 = 0;
pub const IO: u8 = 1;
pub const VALIDATION: u8 = 2;
pub const TOLERANCE: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        Self { code: IO, error: error.into() }
    }

    pub fn validation(error: impl Into<anyhow::Error>) -> Self {
        Self { code: VALIDATION, error: error.into() }
    }

    /// Tolerance breaches print their own report; `error` is a one-line summary.
    pub fn tolerance(error: impl Into<anyhow::Error>) -> Self {
        Self { code: TOLERANCE, error: error.into() }
    }

    pub fn context(self, msg: impl std::fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            code: self.code,
            error: self.error.context(msg),
        }
    }

    pub fn report(&self) -> ExitCode {
        // core errors already embed their cause, so skip repeats
        let mut msg = String::new();
        for cause in self.error.chain().map(ToString::to_string) {
            if !msg.ends_with(&cause) {
                if !msg.is_empty() {
                    msg.push_str(": ");
                }
                msg.push_str(&cause);
            }
        }
        eprintln!("error: {msg}");
        ExitCode::from(self.code)
    }
}

impl From<tdlforge::Error> for CliError {
    fn from(e: tdlforge::Error) -> Self {
        let code = if e.is_io() { IO } else { VALIDATION };
        Self { code, error: e.into() }
    }
}
