use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the model, the simulator and the fitters.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input that must be finite was NaN or infinite.
    NonFinite(&'static str),
    /// A parameter or configuration value broke its invariant.
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    /// Two collections that must agree in length do not.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A grid or dataset was empty, unordered or otherwise unusable.
    InvalidGrid(&'static str),
    /// Asked for a cycle past the end of the run.
    CycleOutOfRange { cycle: usize, n_cycles: usize },
    /// DC turn-on is undefined for a leak-free floating body.
    InfiniteLeakTime,
    /// Not enough usable points to fit a model.
    InsufficientData {
        what: &'static str,
        needed: usize,
        found: usize,
    },
    /// Least-squares design matrix is singular (all abscissae equal).
    DegenerateDesign,
    /// The charge-to-voltage map between crossbar layers has zero span.
    DegenerateChargeMap,
    /// No leak-time candidate produced a valid model.
    NoValidTau,
    /// Event bisection did not converge. Cannot happen for monotone charge.
    Internal(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite(what) => write!(f, "{what} must be finite"),
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected length {expected}, found {found}"),
            Error::InvalidGrid(reason) => write!(f, "invalid grid: {reason}"),
            Error::CycleOutOfRange { cycle, n_cycles } => {
                write!(f, "cycle {cycle} out of range (run has {n_cycles} cycles)")
            }
            Error::InfiniteLeakTime => f.write_str("DC turn-on undefined for infinite tau_leak"),
            Error::InsufficientData {
                what,
                needed,
                found,
            } => write!(f, "{what}: need at least {needed} points, found {found}"),
            Error::DegenerateDesign => f.write_str("degenerate design: all abscissae are equal"),
            Error::DegenerateChargeMap => f.write_str("charge-to-voltage map has zero span"),
            Error::NoValidTau => f.write_str("no tau candidate admits a valid leaky model"),
            Error::Internal(what) => write!(f, "internal error: {what}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}
