use std::fmt;

use wick_mps::Error;

use crate::exit;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Malformed(String),
    Io(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Malformed(_) => exit::USAGE,
            CliError::Io(_) => exit::IO,
            CliError::Core(e) => match e {
                Error::GenericityFailure(_) => exit::GENERATION,
                Error::DegenerateSpectrum { .. } => exit::DEGENERATE,
                Error::InfinitePNumber(_) => exit::INFINITE_P,
                Error::ZeroCoefficient(_) | Error::ZeroWitness(_) => exit::ZERO_COEFFICIENT,
                Error::NumericalFailure => exit::IO,
                _ => exit::USAGE,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Malformed(m) => write!(f, "malformed input: {m}"),
            CliError::Io(m) => write!(f, "i/o: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}
