use std::fmt;

/// Maps onto the process exit code: validation problems exit 1, anything
/// that goes wrong while doing the work exits 2.
#[derive(Debug)]
pub enum Failure {
    Validation(Vec<String>),
    Runtime(String),
}

impl Failure {
    pub fn validation(msg: impl Into<String>) -> Self {
        Failure::Validation(vec![msg.into()])
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(problems) => {
                write!(f, "invalid configuration:")?;
                for p in problems {
                    write!(f, "\n  - {p}")?;
                }
                Ok(())
            }
            Failure::Runtime(msg) => f.write_str(msg),
        }
    }
}

impl From<cdsk::Error> for Failure {
    fn from(e: cdsk::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(format!("csv: {e}"))
    }
}

pub type CmdResult = Result<(), Failure>;
