use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("atom {index}: negative mass {mass} at position {position}")]
    NegativeMass { index: usize, position: f64, mass: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("point {point} is not a grid point at scale exponent {scale}")]
    OffGrid { point: f64, scale: i32 },

    #[error("scale exponents differ: {0} vs {1}")]
    ScaleMismatch(i32, i32),

    #[error("empty interval")]
    EmptyInterval,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("support of {0} meets (-inf, 0]")]
    NotOnHalfLine(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("function has a component on bad interval [{left}, +{cells} cells)")]
    BadComponent { left: i64, cells: i64 },

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
