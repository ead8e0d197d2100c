use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A user-supplied value failed validation. `field` names the offending
    /// input (a JSON path, flag or argument name).
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("map image at {point:?} is invalid: {reason}")]
    BadImage { point: Vec<f64>, reason: String },

    /// Carrier forcing removed every admissible label, meaning the map sends
    /// a boundary point out of the domain.
    #[error("no admissible label at {point:?}: displacement {displacement:?} leaves the domain")]
    OutwardDisplacement {
        point: Vec<f64>,
        displacement: Vec<f64>,
    },

    #[error("no candidates at depth 0: check u.s.c./domain mapping")]
    NoCandidates,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed input rather than by the map or
    /// the search itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. } | Error::Invalid { .. } | Error::Json(_)
        )
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
