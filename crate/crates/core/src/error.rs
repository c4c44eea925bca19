use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A scalar parameter is non-finite or outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An integration interval is not ordered as required.
    #[error("invalid integration range [{lower}, {upper}] (parent size {parent})")]
    InvalidRange { lower: f64, upper: f64, parent: f64 },

    /// Two vectors or a vector and a grid disagree in length.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A caller-supplied argument violates an operation precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A weight denominator vanished for the given (1-based) cell.
    #[error("degenerate grid: weight denominator vanishes at cell {cell}")]
    DegenerateGrid { cell: usize },

    /// A time integration produced NaN or infinite values.
    #[error("numerical blow-up at step {step}")]
    Blowup { step: usize },

    /// Gradient descent failed at the given iteration.
    #[error("descent failed at iteration {iteration}: {source}")]
    Descent {
        iteration: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

impl Error {
    /// True when the error stems from non-finite values during time stepping.
    pub fn is_blowup(&self) -> bool {
        match self {
            Error::Blowup { .. } => true,
            Error::Descent { source, .. } => source.is_blowup(),
            _ => false,
        }
    }
}
