use spinlattice::ErrorClass;

/// Runner failures, each mapped to a process exit status.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("config error: {0}")]
    Schema(String),
    #[error("numeric guard: {0}")]
    Numeric(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Schema(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Invariant(_) => 4,
        }
    }
}

impl From<spinlattice::Error> for Failure {
    fn from(e: spinlattice::Error) -> Self {
        match e.class() {
            ErrorClass::Input => Failure::Schema(e.to_string()),
            ErrorClass::NumericGuard => Failure::Numeric(e.to_string()),
            ErrorClass::Invariant => Failure::Invariant(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}
