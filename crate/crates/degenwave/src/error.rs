use std::fmt;

/// Errors produced by constructors and solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A weight function violates the admissibility hypotheses.
    InvalidWeight(String),
    /// An argument is outside its documented domain.
    Domain(String),
    /// A simulation or solver configuration is inconsistent.
    Config(String),
    /// A root bracket could not be established.
    Bracket(String),
    /// A linear or scalar solve failed numerically.
    Numerical(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidWeight(m) => write!(f, "invalid weight: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Bracket(m) => write!(f, "bracket failure: {m}"),
            Error::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
