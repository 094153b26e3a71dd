use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Shapes or lengths do not line up.
    Dimension(String),
    /// A backward pass was requested without a matching forward cache.
    State(String),
    /// An argument is out of its valid range.
    Argument(String),
    /// A non-finite value or a zero variance/denominator.
    Numeric(String),
    /// Photometric alignment could not be solved.
    Alignment(String),
    /// Invalid network specification.
    Spec(String),
    /// A statistic over an empty set was requested.
    UndefinedStatistic(String),
    /// View-window sampling failed.
    Sampling(String),
    /// Split generation failed.
    Split(String),
    /// Evaluation could not run.
    Evaluation(String),
    /// Malformed serialized data.
    Format(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            Error::Dimension(m) => ("dimension error", m),
            Error::State(m) => ("state error", m),
            Error::Argument(m) => ("argument error", m),
            Error::Numeric(m) => ("numeric error", m),
            Error::Alignment(m) => ("alignment error", m),
            Error::Spec(m) => ("spec error", m),
            Error::UndefinedStatistic(m) => ("undefined statistic", m),
            Error::Sampling(m) => ("sampling error", m),
            Error::Split(m) => ("split error", m),
            Error::Evaluation(m) => ("evaluation error", m),
            Error::Format(m) => ("format error", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
