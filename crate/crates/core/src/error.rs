use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A frame configuration violates its slot-budget invariants.
    #[error("invalid frame config: {0}")]
    InvalidConfig(String),

    /// The requested `q` leaves no push access slot.
    #[error(
        "invalid split: q = {q} leaves k_a = {k_a} push access slots; \
         constraint k_a >= 1 requires q <= {q_max}"
    )]
    InvalidSplit { q: u32, k_a: i64, q_max: u32 },

    /// The request has no solution (e.g. a rate bound with no pull capacity).
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by an infeasible design point rather than a bad
    /// argument.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::InvalidSplit { .. } | Error::Infeasible(_))
    }
}
