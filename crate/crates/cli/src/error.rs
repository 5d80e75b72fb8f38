use arcula::ErrorKind;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CRYPTO: u8 = 3;
pub const EXIT_CORRUPT: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub exit: u8,
}

impl CliError {
    pub fn usage(code: &'static str, message: impl Into<String>) -> Self {
        CliError { code, message: message.into(), exit: EXIT_USAGE }
    }

    pub fn crypto(code: &'static str, message: impl Into<String>) -> Self {
        CliError { code, message: message.into(), exit: EXIT_CRYPTO }
    }

    pub fn corrupt(code: &'static str, message: impl Into<String>) -> Self {
        CliError { code, message: message.into(), exit: EXIT_CORRUPT }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": self.code, "message": self.message })
    }
}

impl From<arcula::Error> for CliError {
    fn from(e: arcula::Error) -> Self {
        let exit = match e.kind() {
            ErrorKind::Usage => EXIT_USAGE,
            ErrorKind::Crypto => EXIT_CRYPTO,
            ErrorKind::Corruption => EXIT_CORRUPT,
        };
        CliError { code: e.code(), message: e.to_string(), exit }
    }
}

pub type CliResult<T> = Result<T, CliError>;
