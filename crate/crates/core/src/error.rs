use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Both candidate blocks and every backing probe were occupied.
    #[error("filter is full")]
    Full,

    /// The quotient filter would exceed its maximum load factor.
    #[error("load limit reached ({occupied} of {limit} slots in use)")]
    LoadLimit { occupied: usize, limit: usize },

    /// A shift would write past the end of the region after the canonical one.
    #[error("shift for quotient {quotient} would cross slot {limit}")]
    ShiftBound { quotient: u64, limit: usize },

    #[error("count overflow")]
    CountOverflow,

    #[error("input error: {0}")]
    Input(String),

    /// A structural invariant check failed.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for the errors that mean "the structure is at capacity".
    pub fn is_capacity(&self) -> bool {
        matches!(
            self,
            Error::Full | Error::LoadLimit { .. } | Error::ShiftBound { .. }
        )
    }
}
