use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its admissible domain.
    #[error("invalid {name}: {reason}")]
    Domain { name: &'static str, reason: String },

    /// Two vectors or matrices that must agree in size do not.
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// The matched-filter output is identically zero, so the transmit
    /// direction is undefined.
    #[error("matched-filter estimate is zero; retrodirective transmit direction undefined")]
    DegenerateEstimate,

    /// An ER measured no beamed power while still beaconing toward a positive target.
    #[error("ER {er} measured non-positive beamed power {measured:e} W in block {block}")]
    DegenerateMeasurement { er: usize, block: u64, measured: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            actual,
        })
    }
}
