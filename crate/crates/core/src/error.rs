use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors reported by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An operand does not have the shape the operation requires.
    Dimension { operand: &'static str, expected: (usize, usize), found: (usize, usize) },
    /// A buffer length does not match `rows * cols`, or a dimension is zero.
    BadShape { rows: usize, cols: usize, len: usize },
    /// An entry violates the container's invariant (negative, non-finite, non-binary).
    InvalidEntry { row: usize, col: usize, value: f64, reason: &'static str },
    /// I-divergence term with a positive target and a zero model value.
    InfiniteDivergence { row: usize, col: usize },
    /// A configuration or argument value is outside its allowed range.
    InvalidParameter { name: &'static str, reason: &'static str },
    /// A document carries a label that is not in the class list.
    UnknownLabel(String),
    /// Duplicate document identifier in a corpus.
    DuplicateId(String),
    /// Vocabulary construction found no training documents.
    EmptyTrainingSplit,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { operand, expected, found } => write!(
                f,
                "dimension mismatch for `{operand}`: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::BadShape { rows, cols, len } => {
                write!(f, "cannot build a {rows}x{cols} matrix from {len} entries")
            }
            Error::InvalidEntry { row, col, value, reason } => {
                write!(f, "entry ({row}, {col}) = {value} is invalid: {reason}")
            }
            Error::InfiniteDivergence { row, col } => {
                write!(f, "I-divergence is infinite at ({row}, {col}): positive target, zero model value")
            }
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::UnknownLabel(label) => write!(f, "unknown label `{label}`"),
            Error::DuplicateId(id) => write!(f, "duplicate document id `{id}`"),
            Error::EmptyTrainingSplit => f.write_str("corpus has no training documents"),
        }
    }
}

impl core::error::Error for Error {}
