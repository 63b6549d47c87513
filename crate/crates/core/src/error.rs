use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid construction with bad bounds, cell counts or dimension.
    InvalidGrid(String),
    /// Density values that are negative, non-finite, or far from unit mass.
    InvalidDensity(String),
    /// Two objects that must share a grid do not.
    GridMismatch,
    /// Operation is defined for one dimension only.
    DimensionUnsupported {
        expected: usize,
        found: usize,
    },
    InvalidEnergy(String),
    /// Scalar argument outside the domain of the function.
    Domain {
        what: &'static str,
        value: f64,
    },
    InvalidKernel(String),
    SpeciesOutOfRange {
        index: usize,
        count: usize,
    },
    /// Brute-force LP oracle called on an instance that is too large.
    SizeExceeded {
        size: usize,
        limit: usize,
    },
    /// Iterative solver stopped before reaching its tolerance.
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// Time outside the span of a trajectory.
    TimeOutOfRange {
        t: f64,
        end: f64,
    },
    /// Optimality residual requires an exact transport map.
    NotAvailable(&'static str),
    InvalidArgument(String),
    /// A proximal step failed inside a time loop.
    StepFailed {
        step: usize,
        species: usize,
        source: Box<Error>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::InvalidDensity(msg) => write!(f, "invalid density: {msg}"),
            Error::GridMismatch => write!(f, "operands live on different grids"),
            Error::DimensionUnsupported { expected, found } => {
                write!(f, "operation requires dimension {expected}, got {found}")
            }
            Error::InvalidEnergy(msg) => write!(f, "invalid internal energy: {msg}"),
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::InvalidKernel(msg) => write!(f, "invalid interaction: {msg}"),
            Error::SpeciesOutOfRange { index, count } => {
                write!(f, "species index {index} out of range (l = {count})")
            }
            Error::SizeExceeded { size, limit } => {
                write!(f, "instance size {size} exceeds limit {limit}")
            }
            Error::NoConvergence {
                solver,
                iterations,
                residual,
            } => write!(
                f,
                "{solver} did not converge after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::TimeOutOfRange { t, end } => {
                write!(f, "time {t} is beyond the trajectory end {end}")
            }
            Error::NotAvailable(what) => write!(f, "not available: {what}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::StepFailed {
                step,
                species,
                source,
            } => write!(f, "step {step}, species {species}: {source}"),
        }
    }
}

impl core::error::Error for Error {}
